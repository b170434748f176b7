#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ddsp/solver.hpp"

namespace ddsp {

namespace {

std::atomic<unsigned> file_counter{0};

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size())) {
    s.replace(at, from.size(), to);
  }
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Status keywords as written by common solvers; first match wins.
std::optional<SolveStatus> status_from_text(const std::string& text) {
  static const std::regex infeasible(R"(\binfeasible\b)", std::regex::icase);
  static const std::regex limit(R"(time[ _-]?limit|node[ _-]?limit|\bfeasible\b)", std::regex::icase);
  static const std::regex optimal(R"(\boptimal\b)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, infeasible) && !std::regex_search(text, m, optimal)) {
    return SolveStatus::kInfeasible;
  }
  if (std::regex_search(text, m, optimal)) return SolveStatus::kOptimal;
  if (std::regex_search(text, m, limit)) return SolveStatus::kFeasibleTimeLimit;
  return std::nullopt;
}

struct TempFiles {
  std::filesystem::path lp, sol;
  TempFiles() {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string stem =
        "ddsp_" + std::to_string(::getpid()) + "_" + std::to_string(file_counter++);
    lp = dir / (stem + ".lp");
    sol = dir / (stem + ".sol");
  }
  ~TempFiles() {
    std::error_code ec;
    std::filesystem::remove(lp, ec);
    std::filesystem::remove(sol, ec);
  }
};

}  // namespace

SolveResult solve_external(const MilpModel& model, const SolverConfig& config) {
  config.validate();
  if (config.command_template.empty()) throw SolverError("external solver command is not set");
  const auto start = std::chrono::steady_clock::now();
  SolveResult result;

  TempFiles files;
  {
    std::ofstream out(files.lp);
    if (!out) throw SolverError("cannot write " + files.lp.string());
    out << export_lp_text(model);
  }
  std::string command = config.command_template;
  replace_all(command, "{in}", quoted(files.lp));
  replace_all(command, "{out}", quoted(files.sol));
  std::ostringstream tl;
  tl << config.time_limit;
  replace_all(command, "{tl}", tl.str());

  const int rc = std::system(command.c_str());
  if (rc != 0) {
    throw SolverError("external solver failed (exit status " + std::to_string(rc) + "): " + command);
  }
  std::ifstream in(files.sol);
  if (!in) throw SolverError("external solver wrote no solution file " + files.sol.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  const auto status = status_from_text(text);
  if (status == SolveStatus::kInfeasible) {
    result.status = SolveStatus::kInfeasible;
  } else {
    result.assignment = parse_solution_text(text, model, default_solution_patterns());
    const auto bad = model.violations(result.assignment, config.tolerance);
    if (!bad.empty()) {
      result.status = SolveStatus::kError;
      result.message = "external solution violates " + bad.front();
      result.assignment.clear();
    } else {
      result.status = status.value_or(SolveStatus::kOptimal);
      result.objective = model.evaluate(result.assignment);
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ddsp
