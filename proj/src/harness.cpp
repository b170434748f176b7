#include "ddsp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace ddsp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) {
    throw HarnessError("bad number '" + s + "' for " + what);
  }
  return v;
}

long long to_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw HarnessError("bad integer '" + s + "' for " + what);
  return v;
}

std::uint64_t to_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw HarnessError("bad unsigned integer '" + s + "' for " + what);
  return v;
}

bool to_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw HarnessError("bad flag '" + s + "' for " + what);
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw HarnessError("unterminated quote in CSV line: " + line);
  out.push_back(cur);
  return out;
}

std::string pct_or_empty(const std::optional<double>& v) { return v ? format_pct(*v) : std::string(); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string default_network_path() {
#ifdef DDSP_DEFAULT_NETWORK
  return DDSP_DEFAULT_NETWORK;
#else
  return "data/sioux_falls.net";
#endif
}

std::string default_external_command() {
#ifdef DDSP_TOOLS_DIR
  return std::string("python3 ") + DDSP_TOOLS_DIR + "/highs_solve.py {in} {out} {tl}";
#else
  return "python3 tools/highs_solve.py {in} {out} {tl}";
#endif
}

SolveStatus status_from_string(const std::string& s) {
  for (auto st : {SolveStatus::kOptimal, SolveStatus::kFeasibleTimeLimit, SolveStatus::kInfeasible,
                  SolveStatus::kError}) {
    if (s == to_string(st)) return st;
  }
  throw HarnessError("unknown solve status '" + s + "'");
}

}  // namespace

std::string format_pct(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

PolicySpec parse_policy_spec(const std::string& raw) {
  std::string text = trim(raw);
  PolicySpec spec;
  if (text.empty()) throw HarnessError("empty policy spec");
  if (text == "MYOPIC") {
    spec.label = text;
    return spec;
  }
  spec.myopic = false;
  static const std::string kUniform = "@uniform";
  if (text.size() > kUniform.size() && text.ends_with(kUniform)) {
    spec.beta = BetaMode::kUniform;
    text.resize(text.size() - kUniform.size());
  }
  spec.label = text;
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      spec.profile = named_alpha_profile(text);
    } else {
      const std::string kind = text.substr(0, colon);
      const auto args = split(text.substr(colon + 1), ',');
      const auto need = [&](std::size_t n) {
        if (args.size() != n) {
          throw HarnessError("policy '" + raw + "' needs " + std::to_string(n) + " parameters");
        }
      };
      if (kind == "const") {
        need(1);
        spec.profile = AlphaProfile::constant(to_double(args[0], raw), text);
      } else if (kind == "poly") {
        need(3);
        spec.profile = AlphaProfile::polynomial(to_double(args[0], raw), to_double(args[1], raw),
                                                to_double(args[2], raw), text);
      } else if (kind == "exp") {
        need(3);
        spec.profile = AlphaProfile::exponential(to_double(args[0], raw), to_double(args[1], raw),
                                                 to_double(args[2], raw), text);
      } else if (kind == "step") {
        std::vector<std::pair<double, int>> segs;
        for (const auto& a : args) {
          const auto x = a.find('x');
          if (x == std::string::npos) throw HarnessError("step segment '" + a + "' is not AxN");
          segs.emplace_back(to_double(a.substr(0, x), raw),
                            static_cast<int>(to_int(a.substr(x + 1), raw)));
        }
        if (segs.empty()) throw HarnessError("policy '" + raw + "' has no segments");
        spec.profile = AlphaProfile::stepwise(std::move(segs), text);
      } else {
        throw HarnessError("unknown policy kind '" + kind + "'");
      }
    }
  } catch (const PolicyError& e) {
    throw HarnessError(std::string("policy '") + raw + "': " + e.what());
  }
  if (spec.beta == BetaMode::kUniform) spec.label += kUniform;
  return spec;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) throw HarnessError("empty entry in seed list '" + text + "'");
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_uint(part, "seeds"));
      continue;
    }
    const auto lo = to_uint(trim(part.substr(0, dash)), "seeds");
    const auto hi = to_uint(trim(part.substr(dash + 1)), "seeds");
    if (hi < lo) throw HarnessError("descending seed range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw HarnessError("empty seed list");
  return out;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.profile = "desk";
  c.network_path = default_network_path();
  c.demand.rate = 20.0;
  c.policies = {parse_policy_spec("MYOPIC")};
  c.solver.backend = SolverBackend::kBuiltin;
  c.solver.time_limit = 60.0;
  c.solver.node_limit = 300000;
  return c;
}

ExperimentConfig ExperimentConfig::paper() {
  ExperimentConfig c = desk();
  c.profile = "paper";
  c.demand.rate = 100.0;
  c.seeds = {0, 1, 2, 3, 4};
  c.solver.backend = SolverBackend::kExternal;
  c.solver.command_template = default_external_command();
  c.solver.time_limit = 300.0;
  c.solver.node_limit = 0;
  return c;
}

bool ExperimentConfig::needs_model() const {
  if (uniform_beta) return false;
  return std::any_of(policies.begin(), policies.end(),
                     [](const PolicySpec& p) { return !p.myopic && p.beta == BetaMode::kLearned; });
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw HarnessError("experiment needs at least one seed");
  if (policies.empty()) throw HarnessError("experiment needs at least one policy");
  if (intervals < 1) throw HarnessError("intervals must be positive");
  if (duration < 1) throw HarnessError("duration must be positive");
  if (capacity < 0) throw HarnessError("capacity override must be non-negative");
  if (workers < 1) throw HarnessError("workers must be positive");
  if (k < 1) throw HarnessError("k must be positive");
  if (network_path.empty()) throw HarnessError("network path is not set");
  std::set<std::string> labels;
  for (const auto& p : policies) {
    if (!labels.insert(p.label).second) throw HarnessError("duplicate policy " + p.label);
    if (!p.myopic) {
      try {
        p.profile.validate(intervals);
      } catch (const PolicyError& e) {
        throw HarnessError(e.what());
      }
    }
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw HarnessError("duplicate seeds in seed list");
  try {
    demand.validate();
    solver.validate();
  } catch (const std::exception& e) {
    throw HarnessError(e.what());
  }
  if (needs_model() && model_path.empty()) {
    if (training_intervals < 1 || virtual_intervals < 1) {
      throw HarnessError("in-process training needs positive training and virtual intervals");
    }
  }
}

void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "profile") {
    if (v == "desk") {
      c = ExperimentConfig::desk();
    } else if (v == "paper") {
      c = ExperimentConfig::paper();
    } else {
      throw HarnessError("unknown profile '" + v + "' (desk or paper)");
    }
  } else if (key == "network") {
    c.network_path = v;
  } else if (key == "capacity") {
    c.capacity = static_cast<int>(to_int(v, key));
  } else if (key == "rate") {
    c.demand.rate = to_double(v, key);
  } else if (key == "origin_decay") {
    c.demand.origin_decay = to_double(v, key);
  } else if (key == "destination_decay") {
    c.demand.destination_decay = to_double(v, key);
  } else if (key == "departure_offset_min") {
    c.demand.departure_offset_min = static_cast<int>(to_int(v, key));
  } else if (key == "departure_offset_max") {
    c.demand.departure_offset_max = static_cast<int>(to_int(v, key));
  } else if (key == "window_shape") {
    c.demand.window_shape = to_double(v, key);
  } else if (key == "profit_min") {
    c.demand.profit_min = static_cast<int>(to_int(v, key));
  } else if (key == "profit_max") {
    c.demand.profit_max = static_cast<int>(to_int(v, key));
  } else if (key == "intervals") {
    c.intervals = static_cast<int>(to_int(v, key));
  } else if (key == "duration") {
    c.duration = static_cast<TimeStep>(to_int(v, key));
  } else if (key == "seeds") {
    c.seeds = parse_seed_list(v);
  } else if (key == "policies") {
    c.policies.clear();
    for (const auto& w : split_ws(v)) c.policies.push_back(parse_policy_spec(w));
  } else if (key == "uniform_beta") {
    c.uniform_beta = to_bool(v, key);
  } else if (key == "model") {
    c.model_path = v;
  } else if (key == "k") {
    c.k = static_cast<int>(to_int(v, key));
  } else if (key == "training_intervals") {
    c.training_intervals = static_cast<int>(to_int(v, key));
  } else if (key == "virtual_intervals") {
    c.virtual_intervals = static_cast<int>(to_int(v, key));
  } else if (key == "training_seed") {
    c.training_seed = to_uint(v, key);
  } else if (key == "solver") {
    if (v == "builtin") {
      c.solver.backend = SolverBackend::kBuiltin;
    } else if (v == "external") {
      c.solver.backend = SolverBackend::kExternal;
      if (c.solver.command_template.empty()) c.solver.command_template = default_external_command();
    } else {
      throw HarnessError("unknown solver '" + v + "' (builtin or external)");
    }
  } else if (key == "solver_cmd") {
    c.solver.command_template = v;
  } else if (key == "time_limit") {
    c.solver.time_limit = to_double(v, key);
  } else if (key == "node_limit") {
    c.solver.node_limit = to_uint(v, key);
  } else if (key == "relative_gap") {
    c.solver.relative_gap = to_double(v, key);
  } else if (key == "output") {
    c.output_dir = v;
  } else if (key == "workers") {
    c.workers = static_cast<int>(to_int(v, key));
  } else {
    throw HarnessError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::vector<std::tuple<int, std::string, std::string>> entries;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw HarnessError("config line " + std::to_string(n) + ": expected key = value");
    }
    entries.emplace_back(n, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return std::get<1>(e) == "profile"; });
  for (const auto& [n, key, value] : entries) {
    try {
      apply_config_value(base, key, value);
    } catch (const HarnessError& e) {
      throw HarnessError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw HarnessError("cannot open config file " + path);
  try {
    return parse_config(in, std::move(base));
  } catch (const HarnessError& e) {
    throw HarnessError(path + ": " + e.what());
  }
}

std::string manifest_text(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "profile = " << c.profile << "\n";
  o << "network = " << c.network_path << "\n";
  o << "capacity = " << c.capacity << "\n";
  o << "rate = " << num(c.demand.rate) << "\n";
  o << "origin_decay = " << num(c.demand.origin_decay) << "\n";
  o << "destination_decay = " << num(c.demand.destination_decay) << "\n";
  o << "departure_offset_min = " << c.demand.departure_offset_min << "\n";
  o << "departure_offset_max = " << c.demand.departure_offset_max << "\n";
  o << "window_shape = " << num(c.demand.window_shape) << "\n";
  o << "profit_min = " << c.demand.profit_min << "\n";
  o << "profit_max = " << c.demand.profit_max << "\n";
  o << "intervals = " << c.intervals << "\n";
  o << "duration = " << c.duration << "\n";
  o << "seeds =";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? "," : " ") << c.seeds[i];
  o << "\npolicies =";
  for (const auto& p : c.policies) o << " " << p.label;
  o << "\nuniform_beta = " << (c.uniform_beta ? "true" : "false") << "\n";
  o << "model = " << c.model_path << "\n";
  o << "k = " << c.k << "\n";
  o << "training_intervals = " << c.training_intervals << "\n";
  o << "virtual_intervals = " << c.virtual_intervals << "\n";
  o << "training_seed = " << c.training_seed << "\n";
  o << "solver = " << (c.solver.backend == SolverBackend::kBuiltin ? "builtin" : "external") << "\n";
  o << "solver_cmd = " << c.solver.command_template << "\n";
  o << "time_limit = " << num(c.solver.time_limit) << "\n";
  o << "node_limit = " << c.solver.node_limit << "\n";
  o << "relative_gap = " << num(c.solver.relative_gap) << "\n";
  o << "output = " << c.output_dir << "\n";
  o << "workers = " << c.workers << "\n";
  return o.str();
}

Network load_experiment_network(const ExperimentConfig& config) {
  Network net = load_network(config.network_path);
  if (config.capacity <= 0) return net;
  std::vector<Node> nodes(net.nodes().begin(), net.nodes().end());
  std::vector<LinkSpec> links;
  for (const Link& l : net.links()) links.push_back({l.id, l.tail, l.head, l.length, config.capacity});
  return Network::build(std::move(nodes), std::move(links), net.velocity(), net.allow_u_turns());
}

GapFigures compute_gap(const PolicyRunReport& baseline, const PolicyRunReport& policy) {
  if (baseline.arrived != policy.arrived) {
    throw HarnessError("policies " + baseline.policy + " and " + policy.policy +
                       " saw different arrivals");
  }
  GapFigures g;
  g.profit_gap = policy.profit - baseline.profit;
  if (baseline.profit != 0) {
    g.profit_gap_pct = 100.0 * static_cast<double>(g.profit_gap) / static_cast<double>(baseline.profit);
  }
  g.service_gap = policy.accepted - baseline.accepted;
  if (baseline.arrived != 0) {
    g.service_gap_pct = 100.0 * g.service_gap / static_cast<double>(baseline.arrived);
  }
  return g;
}

std::optional<std::size_t> ComparisonReport::baseline() const {
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (policies[i] == "MYOPIC") return i;
  }
  return std::nullopt;
}

bool ComparisonReport::has_gaps() const { return baseline().has_value() && policies.size() > 1; }

void ComparisonReport::validate() const {
  for (const auto& inst : instances) {
    if (inst.runs.size() != policies.size()) {
      throw HarnessError("seed " + std::to_string(inst.seed) + " lacks some policy runs");
    }
    for (std::size_t p = 0; p < inst.runs.size(); ++p) {
      if (inst.runs[p].policy != policies[p]) {
        throw HarnessError("seed " + std::to_string(inst.seed) + ": run order does not match policies");
      }
      if (inst.runs[p].arrived != inst.runs.front().arrived) {
        throw HarnessError("seed " + std::to_string(inst.seed) + ": policies saw different arrivals");
      }
    }
  }
}

ComparisonReport run_experiment(const ExperimentConfig& config, const Network& network,
                                const KnnRegressor* model) {
  config.validate();
  if (config.needs_model() && !model) throw HarnessError("learned beta policies need a kNN model");

  ComparisonReport report;
  for (const auto& p : config.policies) {
    std::string label = p.label;
    if (!p.myopic && config.uniform_beta && p.beta != BetaMode::kUniform) label += "@uniform";
    report.policies.push_back(label);
  }
  {
    std::set<std::string> unique(report.policies.begin(), report.policies.end());
    if (unique.size() != report.policies.size()) {
      throw HarnessError("policies coincide once uniform beta is forced");
    }
  }

  std::vector<Instance> instances;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    const auto seed = config.seeds[i];
    try {
      instances.push_back(
          generate_instance(config.demand, network, config.intervals, config.duration, seed));
    } catch (const std::exception& e) {
      throw HarnessError("seed " + std::to_string(seed) + ": " + e.what());
    }
    InstanceRuns runs;
    runs.index = static_cast<int>(i);
    runs.seed = seed;
    runs.runs.resize(config.policies.size());
    report.instances.push_back(std::move(runs));
  }

  const std::size_t n_pol = config.policies.size();
  const std::size_t n_tasks = instances.size() * n_pol;
  std::vector<std::exception_ptr> errors(n_tasks);
  const auto run_task = [&](std::size_t t) {
    const std::size_t i = t / n_pol;
    const std::size_t p = t % n_pol;
    const PolicySpec& spec = config.policies[p];
    try {
      PolicyRunReport r;
      if (spec.myopic) {
        r = run_myopic(network, instances[i], config.solver);
      } else {
        SurrogatePolicy sp;
        sp.profile = spec.profile;
        sp.beta_mode = config.uniform_beta ? BetaMode::kUniform : spec.beta;
        sp.model = sp.beta_mode == BetaMode::kLearned ? model : nullptr;
        r = run_surrogate(network, instances[i], config.demand, config.solver, sp);
      }
      r.policy = report.policies[p];
      report.instances[i].runs[p] = std::move(r);
    } catch (const std::exception& e) {
      errors[t] = std::make_exception_ptr(HarnessError(
          "seed " + std::to_string(config.seeds[i]) + ", policy " + report.policies[p] + ": " + e.what()));
    }
  };

  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), n_tasks);
  if (n_workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.validate();
  return report;
}

ComparisonReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  Network network = load_experiment_network(config);
  std::optional<KnnRegressor> model;
  if (config.needs_model()) {
    TrainingDataset data;
    if (!config.model_path.empty()) {
      data = load_dataset_file(config.model_path);
    } else {
      TrainingConfig tc;
      tc.demand = config.demand;
      tc.training_intervals = config.training_intervals;
      tc.virtual_intervals = config.virtual_intervals;
      tc.duration = config.duration;
      tc.intervals_per_day = config.intervals;
      tc.seed = config.training_seed;
      data = synthesize_training_data(network, tc);
    }
    if (static_cast<std::size_t>(config.k) > data.rows()) {
      throw HarnessError("k = " + std::to_string(config.k) + " exceeds the " +
                         std::to_string(data.rows()) + " training rows");
    }
    model.emplace(data, config.k);
  }
  ComparisonReport report = run_experiment(config, network, model ? &*model : nullptr);
  if (!config.output_dir.empty()) write_report_files(config.output_dir, report, manifest_text(config));
  return report;
}

void write_summary_csv(std::ostream& out, const ComparisonReport& report) {
  const bool gaps = report.has_gaps();
  const auto base = report.baseline();
  out << "instance,seed,policy,arrived,accepted,service_rate_pct,profit";
  if (gaps) out << ",profit_gap,profit_gap_pct,service_gap,service_gap_pct";
  out << "\n";
  for (const auto& inst : report.instances) {
    for (std::size_t p = 0; p < inst.runs.size(); ++p) {
      const auto& r = inst.runs[p];
      out << inst.index << "," << inst.seed << "," << csv_field(r.policy) << "," << r.arrived << ","
          << r.accepted << "," << format_pct(100.0 * r.service_rate()) << "," << r.profit;
      if (gaps) {
        if (p == *base) {
          out << ",,,,";
        } else {
          const auto g = compute_gap(inst.runs[*base], r);
          out << "," << g.profit_gap << "," << pct_or_empty(g.profit_gap_pct) << "," << g.service_gap
              << "," << pct_or_empty(g.service_gap_pct);
        }
      }
      out << "\n";
    }
  }
}

void write_gaps_csv(std::ostream& out, const ComparisonReport& report) {
  const bool gaps = report.has_gaps();
  const auto base = report.baseline();
  out << "policy,instances,mean_profit";
  if (gaps) out << ",mean_profit_gap,mean_profit_gap_pct,mean_service_gap,mean_service_gap_pct";
  out << "\n";
  for (std::size_t p = 0; p < report.policies.size(); ++p) {
    std::vector<double> profit, gap, gap_pct, sgap, sgap_pct;
    for (const auto& inst : report.instances) {
      const auto& r = inst.runs[p];
      profit.push_back(static_cast<double>(r.profit));
      if (gaps && p != *base) {
        const auto g = compute_gap(inst.runs[*base], r);
        gap.push_back(static_cast<double>(g.profit_gap));
        sgap.push_back(g.service_gap);
        if (g.profit_gap_pct) gap_pct.push_back(*g.profit_gap_pct);
        if (g.service_gap_pct) sgap_pct.push_back(*g.service_gap_pct);
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", mean(profit));
    out << csv_field(report.policies[p]) << "," << report.instances.size() << "," << buf;
    if (gaps) {
      if (p == *base) {
        out << ",,,,";
      } else {
        std::snprintf(buf, sizeof buf, "%.1f", mean(gap));
        std::string g = buf == std::string("-0.0") ? "0.0" : buf;
        std::snprintf(buf, sizeof buf, "%.1f", mean(sgap));
        std::string s = buf == std::string("-0.0") ? "0.0" : buf;
        out << "," << g << "," << (gap_pct.empty() ? "" : format_pct(mean(gap_pct))) << "," << s << ","
            << (sgap_pct.empty() ? "" : format_pct(mean(sgap_pct)));
      }
    }
    out << "\n";
  }
}

void write_intervals_csv(std::ostream& out, const ComparisonReport& report) {
  out << "instance,seed,policy,interval,alpha,arrived,accepted,profit,cumulative_profit,status\n";
  for (const auto& inst : report.instances) {
    for (const auto& r : inst.runs) {
      long cumulative = 0;
      for (const auto& rec : r.intervals) {
        cumulative += rec.profit;
        out << inst.index << "," << inst.seed << "," << csv_field(r.policy) << "," << rec.interval << ","
            << num(rec.alpha) << "," << rec.arrived << "," << rec.accepted << "," << rec.profit << ","
            << cumulative << "," << to_string(rec.status) << "\n";
      }
    }
  }
}

void emit_heatmap_data(std::ostream& out, const ComparisonReport& report) {
  if (report.instances.empty() || report.policies.empty()) {
    throw HarnessError("heat map needs at least one report");
  }
  const bool gaps = report.has_gaps();
  const auto base = report.baseline();
  out << "instance,seed,metric";
  for (const auto& p : report.policies) out << "," << csv_field(p);
  out << "\n";
  for (const auto& inst : report.instances) {
    out << inst.index << "," << inst.seed << ",profit";
    for (const auto& r : inst.runs) out << "," << r.profit;
    out << "\n";
    if (!gaps) continue;
    out << inst.index << "," << inst.seed << ",gap_pct";
    for (const auto& r : inst.runs) out << "," << pct_or_empty(compute_gap(inst.runs[*base], r).profit_gap_pct);
    out << "\n";
  }
}

void write_report_files(const std::string& dir, const ComparisonReport& report,
                        const std::string& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw HarnessError("cannot create output directory " + dir + ": " + ec.message());
  const auto write = [&](const std::string& name, const auto& fn) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw HarnessError("cannot write " + path);
    fn(out);
    if (!out) throw HarnessError("write failed: " + path);
  };
  write("summary.csv", [&](std::ostream& o) { write_summary_csv(o, report); });
  write("gaps.csv", [&](std::ostream& o) { write_gaps_csv(o, report); });
  write("intervals.csv", [&](std::ostream& o) { write_intervals_csv(o, report); });
  write("heatmap.csv", [&](std::ostream& o) { emit_heatmap_data(o, report); });
  if (!manifest.empty()) write("manifest.txt", [&](std::ostream& o) { o << manifest; });
}

ComparisonReport read_report_dir(const std::string& dir) {
  const auto path = std::filesystem::path(dir);
  std::ifstream in(path / "summary.csv");
  if (!in) throw HarnessError("cannot open " + (path / "summary.csv").string());

  const auto read_table = [](std::istream& is, const std::string& name,
                             const std::vector<std::string>& required) {
    std::string line;
    if (!std::getline(is, line)) throw HarnessError(name + " is empty");
    const auto header = parse_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& r : required) {
      if (!col.count(r)) throw HarnessError(name + " lacks column " + r);
    }
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(is, line)) {
      if (trim(line).empty()) continue;
      const auto f = parse_csv_line(line);
      if (f.size() != header.size()) throw HarnessError(name + ": ragged row: " + line);
      std::map<std::string, std::string> row;
      for (const auto& [k, i] : col) row[k] = f[i];
      rows.push_back(std::move(row));
    }
    return rows;
  };

  ComparisonReport report;
  std::map<std::uint64_t, std::size_t> by_seed;
  std::map<std::string, std::size_t> by_policy;
  std::map<std::pair<std::size_t, std::size_t>, PolicyRunReport> runs;
  for (const auto& row : read_table(in, "summary.csv",
                                    {"instance", "seed", "policy", "arrived", "accepted", "profit"})) {
    const auto seed = to_uint(row.at("seed"), "seed");
    auto [si, fresh_seed] = by_seed.emplace(seed, report.instances.size());
    if (fresh_seed) {
      InstanceRuns inst;
      inst.index = static_cast<int>(to_int(row.at("instance"), "instance"));
      inst.seed = seed;
      report.instances.push_back(inst);
    }
    const auto& policy = row.at("policy");
    auto [pi, fresh_policy] = by_policy.emplace(policy, report.policies.size());
    if (fresh_policy) report.policies.push_back(policy);
    PolicyRunReport r;
    r.policy = policy;
    r.arrived = static_cast<int>(to_int(row.at("arrived"), "arrived"));
    r.accepted = static_cast<int>(to_int(row.at("accepted"), "accepted"));
    r.profit = static_cast<long>(to_int(row.at("profit"), "profit"));
    if (!runs.emplace(std::make_pair(si->second, pi->second), r).second) {
      throw HarnessError("summary.csv repeats seed " + std::to_string(seed) + " / " + policy);
    }
  }

  if (std::ifstream iv(path / "intervals.csv"); iv) {
    for (const auto& row : read_table(iv, "intervals.csv",
                                      {"seed", "policy", "interval", "alpha", "arrived", "accepted",
                                       "profit", "status"})) {
      const auto seed = to_uint(row.at("seed"), "seed");
      if (!by_seed.count(seed) || !by_policy.count(row.at("policy"))) {
        throw HarnessError("intervals.csv has a run missing from summary.csv");
      }
      auto& r = runs.at({by_seed.at(seed), by_policy.at(row.at("policy"))});
      IntervalRecord rec;
      rec.interval = static_cast<int>(to_int(row.at("interval"), "interval"));
      rec.alpha = to_double(row.at("alpha"), "alpha");
      rec.arrived = static_cast<int>(to_int(row.at("arrived"), "arrived"));
      rec.accepted = static_cast<int>(to_int(row.at("accepted"), "accepted"));
      rec.profit = static_cast<long>(to_int(row.at("profit"), "profit"));
      rec.status = status_from_string(row.at("status"));
      r.intervals.push_back(rec);
    }
  }

  for (std::size_t i = 0; i < report.instances.size(); ++i) {
    for (std::size_t p = 0; p < report.policies.size(); ++p) {
      auto it = runs.find({i, p});
      if (it == runs.end()) {
        throw HarnessError("summary.csv lacks policy " + report.policies[p] + " for seed " +
                           std::to_string(report.instances[i].seed));
      }
      report.instances[i].runs.push_back(std::move(it->second));
    }
  }
  report.validate();
  return report;
}

ComparisonReport merge_reports(const std::vector<ComparisonReport>& reports) {
  if (reports.empty()) throw HarnessError("nothing to merge");
  ComparisonReport out;
  std::map<std::uint64_t, std::size_t> by_seed;
  std::map<std::pair<std::size_t, std::string>, PolicyRunReport> runs;
  for (const auto& rep : reports) {
    for (const auto& p : rep.policies) {
      if (std::find(out.policies.begin(), out.policies.end(), p) == out.policies.end()) {
        out.policies.push_back(p);
      }
    }
    for (const auto& inst : rep.instances) {
      auto [it, fresh] = by_seed.emplace(inst.seed, out.instances.size());
      if (fresh) {
        InstanceRuns copy;
        copy.index = static_cast<int>(out.instances.size());
        copy.seed = inst.seed;
        out.instances.push_back(copy);
      }
      for (const auto& r : inst.runs) {
        if (!runs.emplace(std::make_pair(it->second, r.policy), r).second) {
          throw HarnessError("policy " + r.policy + " appears twice for seed " + std::to_string(inst.seed));
        }
      }
    }
  }
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    for (const auto& p : out.policies) {
      auto it = runs.find({i, p});
      if (it == runs.end()) {
        throw HarnessError("policy " + p + " has no run for seed " + std::to_string(out.instances[i].seed));
      }
      out.instances[i].runs.push_back(std::move(it->second));
    }
  }
  out.validate();
  return out;
}

}  // namespace ddsp
