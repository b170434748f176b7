#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddsp/milp.hpp"

namespace ddsp {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolveStatus : std::uint8_t { kOptimal, kFeasibleTimeLimit, kInfeasible, kError };
const char* to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::kError;
  std::vector<std::uint8_t> assignment;  // one entry per column when a solution exists
  double objective = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t nodes = 0;
  std::string message;

  bool has_solution() const {
    return status == SolveStatus::kOptimal || status == SolveStatus::kFeasibleTimeLimit;
  }
};

enum class SolverBackend : std::uint8_t { kBuiltin, kExternal };

struct SolverConfig {
  double time_limit = 300.0;  // seconds; wall-clock safety stop
  SolverBackend backend = SolverBackend::kBuiltin;
  // External command; {in}, {out} and {tl} are replaced by the LP file, the
  // solution file and the time limit.
  std::string command_template;
  double tolerance = 1e-6;
  // The builtin search stops once the incumbent is within this fraction of
  // the bound (relative to the incumbent's objective, as MIP solvers do).
  double relative_gap = 1e-4;
  // Builtin search budget in branch-and-bound nodes (0 = unlimited). Unlike the
  // time limit it makes truncated searches reproducible.
  std::uint64_t node_limit = 0;

  void validate() const;
};

SolveResult solve(const MilpModel& model, const SolverConfig& config);
SolveResult solve_builtin(const MilpModel& model, const SolverConfig& config);
SolveResult solve_external(const MilpModel& model, const SolverConfig& config);

// CPLEX-LP text. Columns appear in model order, rows in model order; the
// objective constant is carried in a comment line so re-import keeps it.
std::string export_lp_text(const MilpModel& model);
MilpModel import_lp_text(const std::string& text);

// Solution file parsing: each pattern captures a column name (or index) and a
// value. Lines matching no pattern are ignored.
struct SolutionPattern {
  std::regex pattern;
  int name_group = 1;
  int value_group = 2;
  bool by_index = false;  // name group holds a 0-based column index
};
std::vector<SolutionPattern> default_solution_patterns();
std::vector<std::uint8_t> parse_solution_text(const std::string& text, const MilpModel& model,
                                              const std::vector<SolutionPattern>& patterns);

// Exhaustive reference solver working on routes, independent of the model.
struct OracleRequest {
  Request request;
  bool must_accept = false;              // idle: has to be served
  std::optional<SpaceTimeRoute> pinned;  // active: occupies capacity, no profit
};

struct OracleResult {
  double profit = 0.0;
  std::map<RequestId, SpaceTimeRoute> routes;  // accepted non-pinned requests
  std::uint64_t combinations = 0;              // size of the enumerated space
  bool feasible = true;
};

// Enumerates accept/reject and every space-time route departing in
// [max(e_r, window_start), horizon] for each request, checking combinations
// with check_routes. Throws SolverError if the combination space exceeds
// max_combinations.
OracleResult brute_force_oracle(const Network& network, std::span<const OracleRequest> requests,
                                TimeStep window_start, TimeStep horizon,
                                std::uint64_t max_combinations = 1000000);
OracleResult brute_force_oracle(const Network& network, const std::vector<Request>& requests,
                                TimeStep horizon, std::uint64_t max_combinations = 1000000);

// Space-time routes of a request inside [window_start, horizon]; exposed for
// tests and for sizing oracle instances.
std::vector<SpaceTimeRoute> enumerate_routes(const Network& network, const Request& request,
                                             TimeStep window_start, TimeStep horizon);

}  // namespace ddsp
