#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ddsp/solver.hpp"

namespace ddsp {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_terms(std::ostringstream& out, const std::vector<std::pair<int, double>>& terms,
                 const MilpModel& model) {
  int on_line = 0;
  for (const auto& [c, a] : terms) {
    if (on_line == 8) {
      out << "\n   ";
      on_line = 0;
    }
    out << (a < 0 ? " - " : " + ") << number(std::abs(a)) << ' ' << model.columns[c].name;
    ++on_line;
  }
}

const char* sense_text(Sense s) {
  switch (s) {
    case Sense::kLe: return "<=";
    case Sense::kGe: return ">=";
    case Sense::kEq: return "=";
  }
  return "=";
}

}  // namespace

std::string export_lp_text(const MilpModel& model) {
  std::ostringstream out;
  out << "\\ ddsp interval " << model.interval << " window " << model.window_start << ' '
      << model.window_end << " slack " << model.slack_end << '\n';
  out << "\\ Objective offset: " << number(model.objective_offset) << '\n';
  out << "Maximize\n obj:";
  std::vector<std::pair<int, double>> obj;
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    if (model.columns[c].objective != 0.0) obj.emplace_back(static_cast<int>(c), model.columns[c].objective);
  }
  if (obj.empty() && !model.columns.empty()) obj.emplace_back(0, 0.0);
  write_terms(out, obj, model);
  out << "\nSubject To\n";
  for (const Row& row : model.rows) {
    out << ' ' << row.name << ':';
    write_terms(out, row.terms, model);
    out << ' ' << sense_text(row.sense) << ' ' << number(row.rhs) << '\n';
  }
  out << "Bounds\n";
  for (const Column& c : model.columns) {
    if (c.lower == 0.0 && c.upper == 1.0) continue;
    if (c.lower == c.upper) {
      out << ' ' << c.name << " = " << number(c.lower) << '\n';
    } else {
      out << ' ' << number(c.lower) << " <= " << c.name << " <= " << number(c.upper) << '\n';
    }
  }
  out << "Binaries\n";
  int on_line = 0;
  for (const Column& c : model.columns) {
    out << (on_line == 0 ? " " : " ") << c.name;
    if (++on_line == 10) {
      out << '\n';
      on_line = 0;
    }
  }
  if (on_line != 0) out << '\n';
  out << "End\n";
  return out.str();
}

namespace {

enum class TokKind { kName, kNumber, kSign, kSense, kColon };

struct Token {
  TokKind kind;
  std::string text;
  double value = 0.0;
  int line = 0;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_.[]()!\"#$%&/,;?@'`{}|~").find(c) != std::string_view::npos;
}

std::vector<Token> tokenize(const std::string& text, double& offset, MilpModel& meta) {
  std::vector<Token> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto slash = line.find('\\');
    if (slash != std::string::npos) {
      const std::string comment = line.substr(slash + 1);
      const std::string tag = "Objective offset:";
      const auto at = comment.find(tag);
      if (at != std::string::npos) offset = std::stod(comment.substr(at + tag.size()));
      int i = 0, ws = 0, we = 0, se = 0;
      if (std::sscanf(comment.c_str(), " ddsp interval %d window %d %d slack %d", &i, &ws, &we, &se) == 4) {
        meta.interval = i;
        meta.window_start = ws;
        meta.window_end = we;
        meta.slack_end = se;
      }
      line = line.substr(0, slash);
    }
    std::size_t i = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == ':') {
        out.push_back({TokKind::kColon, ":", 0, line_no});
        ++i;
      } else if (c == '+' || c == '-') {
        out.push_back({TokKind::kSign, std::string(1, c), 0, line_no});
        ++i;
      } else if (c == '<' || c == '>' || c == '=') {
        std::string s(1, c);
        ++i;
        if (i < line.size() && (line[i] == '=' || line[i] == '<' || line[i] == '>')) s += line[i++];
        const std::string norm = s[0] == '<' || (s.size() == 2 && s[1] == '<') ? "<="
                                 : s[0] == '>' || (s.size() == 2 && s[1] == '>') ? ">="
                                                                                 : "=";
        out.push_back({TokKind::kSense, norm, 0, line_no});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t j = i;
        while (j < line.size() &&
               (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '.' ||
                ((line[j] == 'e' || line[j] == 'E') && j + 1 < line.size()) ||
                ((line[j] == '+' || line[j] == '-') && (line[j - 1] == 'e' || line[j - 1] == 'E')))) {
          ++j;
        }
        const std::string s = line.substr(i, j - i);
        out.push_back({TokKind::kNumber, s, std::stod(s), line_no});
        i = j;
      } else if (name_char(c)) {
        std::size_t j = i;
        while (j < line.size() && name_char(line[j])) ++j;
        out.push_back({TokKind::kName, line.substr(i, j - i), 0, line_no});
        i = j;
      } else {
        throw SolverError("LP line " + std::to_string(line_no) + ": unexpected character '" +
                          std::string(1, c) + "'");
      }
    }
  }
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Best-effort inverse of variable_name; unknown names get a synthetic ref.
VariableRef parse_ref(const std::string& name, int ordinal) {
  int r = 0, e = 0, t = 0;
  char tail = 0;
  if (std::sscanf(name.c_str(), "xu_r%d_l%d_t%d%c", &r, &e, &t, &tail) == 3) return {VarKind::kUp, r, e, t};
  if (std::sscanf(name.c_str(), "xd_r%d_l%d_t%d%c", &r, &e, &t, &tail) == 3) return {VarKind::kDown, r, e, t};
  if (std::sscanf(name.c_str(), "g_r%d_j%d_t%d%c", &r, &e, &t, &tail) == 3) return {VarKind::kTurn, r, e, t};
  if (std::sscanf(name.c_str(), "phi_j%d_t%d%c", &e, &t, &tail) == 2) return {VarKind::kJunction, -1, e, t};
  if (std::sscanf(name.c_str(), "z_r%d%c", &r, &tail) == 1) return {VarKind::kAccept, r, -1, 0};
  return {VarKind::kJunction, -2, ordinal, 0};
}

enum class Section { kNone, kObjective, kConstraints, kBounds, kBinaries, kGenerals, kEnd };

}  // namespace

MilpModel import_lp_text(const std::string& text) {
  MilpModel model;
  double offset = 0.0;
  const std::vector<Token> toks = tokenize(text, offset, model);
  std::map<std::string, int> cols;
  std::vector<std::string> binaries;
  const auto column = [&](const std::string& name) {
    auto [it, inserted] = cols.emplace(name, static_cast<int>(model.columns.size()));
    if (inserted) {
      Column c;
      c.name = name;
      model.columns.push_back(c);
    }
    return it->second;
  };
  const auto fail = [](const Token& t, const std::string& what) -> void {
    throw SolverError("LP line " + std::to_string(t.line) + ": " + what);
  };

  Section section = Section::kNone;
  bool minimize = false;
  std::size_t i = 0;
  // Linear expression: [sign] [number] name ...; stops at a sense, section or
  // name followed by a colon (next row label).
  const auto section_of = [&](std::size_t k, std::size_t& consumed) -> std::optional<Section> {
    if (toks[k].kind != TokKind::kName) return std::nullopt;
    const std::string w = lower(toks[k].text);
    consumed = 1;
    if (w == "maximize" || w == "maximum" || w == "max" || w == "maximise") {
      minimize = false;
      return Section::kObjective;
    }
    if (w == "minimize" || w == "minimum" || w == "min" || w == "minimise") {
      minimize = true;
      return Section::kObjective;
    }
    if (w == "subject" || w == "such") {
      if (k + 1 < toks.size() && lower(toks[k + 1].text) == "to") consumed = 2;
      return Section::kConstraints;
    }
    if (w == "st" || w == "s.t.") return Section::kConstraints;
    if (w == "bounds" || w == "bound") return Section::kBounds;
    if (w == "binaries" || w == "binary" || w == "bin") return Section::kBinaries;
    if (w == "generals" || w == "general" || w == "gen") return Section::kGenerals;
    if (w == "end") return Section::kEnd;
    return std::nullopt;
  };
  const auto at_boundary = [&](std::size_t k) {
    std::size_t used = 0;
    if (k >= toks.size()) return true;
    if (toks[k].kind == TokKind::kSense) return true;
    if (section_of(k, used)) {
      // "max:" style row labels are not section keywords.
      return !(k + 1 < toks.size() && toks[k + 1].kind == TokKind::kColon);
    }
    return toks[k].kind == TokKind::kName && k + 1 < toks.size() &&
           toks[k + 1].kind == TokKind::kColon;
  };
  const auto expression = [&](std::vector<std::pair<int, double>>& terms, double& constant) {
    while (!at_boundary(i)) {
      double sign = 1.0;
      while (i < toks.size() && toks[i].kind == TokKind::kSign) {
        if (toks[i].text == "-") sign = -sign;
        ++i;
      }
      double coef = 1.0;
      bool has_number = false;
      if (i < toks.size() && toks[i].kind == TokKind::kNumber) {
        coef = toks[i].value;
        has_number = true;
        ++i;
      }
      if (i < toks.size() && toks[i].kind == TokKind::kName && !at_boundary(i)) {
        terms.emplace_back(column(toks[i].text), sign * coef);
        ++i;
      } else if (has_number) {
        constant += sign * coef;
      } else {
        fail(toks[std::min(i, toks.size() - 1)], "malformed linear expression");
      }
    }
  };

  int row_counter = 0;
  while (i < toks.size()) {
    std::size_t used = 0;
    if (auto s = section_of(i, used);
        s && !(i + 1 < toks.size() && toks[i + 1].kind == TokKind::kColon)) {
      section = *s;
      i += used;
      if (section == Section::kEnd) break;
      continue;
    }
    switch (section) {
      case Section::kObjective: {
        if (toks[i].kind == TokKind::kName && i + 1 < toks.size() &&
            toks[i + 1].kind == TokKind::kColon) {
          i += 2;
        }
        std::vector<std::pair<int, double>> terms;
        double constant = 0.0;
        expression(terms, constant);
        for (const auto& [c, a] : terms) model.columns[c].objective += a;
        offset += constant;
        if (i < toks.size() && toks[i].kind == TokKind::kSense) fail(toks[i], "sense in objective");
        break;
      }
      case Section::kConstraints: {
        Row row;
        if (toks[i].kind == TokKind::kName && i + 1 < toks.size() &&
            toks[i + 1].kind == TokKind::kColon) {
          row.name = toks[i].text;
          i += 2;
        } else {
          row.name = "R" + std::to_string(row_counter);
        }
        ++row_counter;
        double constant = 0.0;
        expression(row.terms, constant);
        if (i >= toks.size() || toks[i].kind != TokKind::kSense) {
          fail(toks[std::min(i, toks.size() - 1)], "expected a constraint sense");
        }
        row.sense = toks[i].text == "<=" ? Sense::kLe : toks[i].text == ">=" ? Sense::kGe : Sense::kEq;
        ++i;
        double sign = 1.0;
        while (i < toks.size() && toks[i].kind == TokKind::kSign) {
          if (toks[i].text == "-") sign = -sign;
          ++i;
        }
        if (i >= toks.size() || toks[i].kind != TokKind::kNumber) {
          fail(toks[std::min(i, toks.size() - 1)], "expected a right-hand side");
        }
        row.rhs = sign * toks[i].value - constant;
        ++i;
        model.rows.push_back(std::move(row));
        break;
      }
      case Section::kBounds: {
        // Forms: x = v | x <= v | x >= v | v <= x | v <= x <= w | x free
        const auto signed_number = [&](double& v) {
          double sign = 1.0;
          std::size_t k = i;
          while (k < toks.size() && toks[k].kind == TokKind::kSign) {
            if (toks[k].text == "-") sign = -sign;
            ++k;
          }
          if (k < toks.size() && toks[k].kind == TokKind::kNumber) {
            v = sign * toks[k].value;
            i = k + 1;
            return true;
          }
          if (k < toks.size() && toks[k].kind == TokKind::kName &&
              (lower(toks[k].text) == "inf" || lower(toks[k].text) == "infinity")) {
            v = sign * HUGE_VAL;
            i = k + 1;
            return true;
          }
          return false;
        };
        double lo = 0.0;
        bool lead = signed_number(lo);
        if (lead) {
          if (i + 1 >= toks.size() || toks[i].kind != TokKind::kSense) fail(toks[i - 1], "bad bound");
          const std::string sense = toks[i++].text;
          Column& c = model.columns[column(toks[i++].text)];
          if (sense == "<=") c.lower = lo;
          else if (sense == ">=") c.upper = lo;
          else c.lower = c.upper = lo;
          if (i < toks.size() && toks[i].kind == TokKind::kSense) {
            const std::string s2 = toks[i++].text;
            double hi = 0.0;
            if (!signed_number(hi)) fail(toks[i - 1], "bad bound");
            if (s2 == "<=") c.upper = hi; else c.lower = hi;
          }
          break;
        }
        if (toks[i].kind != TokKind::kName) fail(toks[i], "bad bound");
        const int ci = column(toks[i++].text);
        Column& c = model.columns[ci];
        if (i < toks.size() && toks[i].kind == TokKind::kName && lower(toks[i].text) == "free") {
          ++i;
          break;
        }
        if (i >= toks.size() || toks[i].kind != TokKind::kSense) fail(toks[i - 1], "bad bound");
        const std::string sense = toks[i++].text;
        double v = 0.0;
        if (!signed_number(v)) fail(toks[i - 1], "bad bound");
        if (sense == "<=") c.upper = v;
        else if (sense == ">=") c.lower = v;
        else c.lower = c.upper = v;
        break;
      }
      case Section::kBinaries:
      case Section::kGenerals:
        if (toks[i].kind != TokKind::kName) fail(toks[i], "expected a variable name");
        column(toks[i].text);
        binaries.push_back(toks[i].text);
        ++i;
        break;
      default:
        fail(toks[i], "content outside any section");
    }
  }
  if (section != Section::kEnd && section != Section::kBinaries && section != Section::kGenerals &&
      section != Section::kBounds && section != Section::kConstraints) {
    throw SolverError("LP text has no constraints section");
  }
  if (minimize) {
    for (Column& c : model.columns) c.objective = -c.objective;
    offset = 0.0 - offset;
  }
  model.objective_offset = offset;

  // Column order: as listed in the binaries section, then by first use.
  std::vector<int> order;
  std::vector<char> placed(model.columns.size(), 0);
  for (const std::string& name : binaries) {
    const int c = cols.at(name);
    if (!placed[c]) {
      placed[c] = 1;
      order.push_back(c);
    }
  }
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    if (!placed[c]) order.push_back(static_cast<int>(c));
  }
  std::vector<int> remap(model.columns.size());
  std::vector<Column> sorted;
  for (std::size_t k = 0; k < order.size(); ++k) {
    remap[order[k]] = static_cast<int>(k);
    sorted.push_back(model.columns[order[k]]);
    sorted.back().ref = parse_ref(sorted.back().name, static_cast<int>(k));
  }
  model.columns = std::move(sorted);
  for (Row& row : model.rows) {
    for (auto& term : row.terms) term.first = remap[term.first];
  }
  model.rebuild_index();
  return model;
}

std::vector<SolutionPattern> default_solution_patterns() {
  const std::string num = R"(([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))";
  return {
      // x[12] = 1   /   x(12) 1
      {std::regex(R"(^\s*[A-Za-z]\w*[\[\(](\d+)[\]\)]\s*[=:]?\s*)" + num + R"(\s*$)"), 1, 2, true},
      // 12 name 1   (index, name, value, optional trailing columns)
      {std::regex(R"(^\s*\d+\s+(\S+)\s+)" + num + R"((?:\s+.*)?$)"), 1, 2, false},
      // name 1   /   name = 1
      {std::regex(R"(^\s*([^\s#=]+)\s*[=\s]\s*)" + num + R"(\s*$)"), 1, 2, false},
  };
}

std::vector<std::uint8_t> parse_solution_text(const std::string& text, const MilpModel& model,
                                              const std::vector<SolutionPattern>& patterns) {
  std::map<std::string, int> by_name;
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    by_name.emplace(model.columns[c].name, static_cast<int>(c));
  }
  std::vector<std::uint8_t> x(model.columns.size(), 0);
  std::vector<char> seen(model.columns.size(), 0);
  std::istringstream in(text);
  std::string line;
  std::size_t matched = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (const SolutionPattern& p : patterns) {
      std::smatch m;
      if (!std::regex_match(line, m, p.pattern)) continue;
      int c = -1;
      if (p.by_index) {
        const std::string idx = m[p.name_group].str();
        c = std::stoi(idx);
        if (c < 0 || c >= static_cast<int>(x.size())) c = -1;
      } else {
        auto it = by_name.find(m[p.name_group].str());
        if (it != by_name.end()) c = it->second;
      }
      if (c < 0) continue;  // rows, objective lines and other noise
      const double v = std::stod(m[p.value_group].str());
      if (!seen[c]) {
        seen[c] = 1;
        ++matched;
        x[c] = std::lround(v) != 0;
      }
      break;
    }
  }
  if (matched == 0 && !model.columns.empty()) {
    throw SolverError("solution file contains no recognizable column values");
  }
  return x;
}

}  // namespace ddsp
