#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/learning.hpp"
#include "ddsp/milp.hpp"
#include "ddsp/network.hpp"
#include "ddsp/solver.hpp"

namespace ddsp {

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Balance weight per interval; t is the 0-based interval index.
struct AlphaProfile {
  enum class Kind : std::uint8_t { kConstant, kStepwise, kPolynomial, kExponential };

  std::string name;
  Kind kind = Kind::kConstant;
  double value = 0.0;                            // constant
  std::vector<std::pair<double, int>> segments;  // stepwise: (alpha, interval count)
  double a2 = 0.0, a1 = 0.0, a0 = 0.0;           // polynomial a2 t^2 + a1 t + a0
  double scale = 1.0, rate = 0.0, offset = 0.0;  // exponential scale e^(rate t) + offset

  static AlphaProfile constant(double alpha, std::string name = {});
  static AlphaProfile stepwise(std::vector<std::pair<double, int>> segments, std::string name = {});
  static AlphaProfile polynomial(double a2, double a1, double a0, std::string name = {});
  static AlphaProfile exponential(double scale, double rate, double offset, std::string name = {});

  // Stepwise segment counts must sum to the number of intervals.
  void validate(int intervals) const;
};

double eval_alpha(const AlphaProfile& profile, int interval_index);

// The named profiles SP_CTE1..6, SP_STP1..6 and SP_PLY1..4.
AlphaProfile named_alpha_profile(const std::string& name);
std::vector<std::string> alpha_profile_names();

struct SimulationState {
  int interval = 0;  // last completed interval
  std::map<RequestId, Request> accepted;          // accepted and not completed
  std::map<RequestId, SpaceTimeRoute> routes;     // keys equal those of accepted
  long profit = 0;
  int accepted_total = 0;
  std::vector<long> interval_profits;
};

struct Segregation {
  std::vector<Request> active;  // departed by the interval start
  std::vector<Request> idle;    // accepted, departing later; e_r clamped
};

// Splits accepted requests at (i-1)D and clamps idle earliest departures in
// the state as well.
Segregation segregate_requests(SimulationState& state, int interval, TimeStep duration);

// Drops requests whose route arrives by iD.
void remove_completed(SimulationState& state, int interval, TimeStep duration);

enum class BetaMode : std::uint8_t { kLearned, kUniform };

struct SurrogatePolicy {
  AlphaProfile profile;
  BetaMode beta_mode = BetaMode::kLearned;
  const KnnRegressor* model = nullptr;  // required for kLearned
};

struct IntervalRecord {
  int interval = 0;
  int arrived = 0;
  int accepted = 0;
  long profit = 0;
  double objective = 0.0;  // solver objective in the model's own units
  double alpha = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  double wall_seconds = 0.0;
  std::uint64_t nodes = 0;
  std::size_t columns = 0;
};

struct PolicyRunReport {
  std::string policy;
  int arrived = 0;
  int accepted = 0;
  long profit = 0;
  // Multiply objectives by this to express them in profit units (the
  // surrogate's profit normalizer; 1 for the myopic policy).
  double objective_scale = 1.0;
  std::vector<IntervalRecord> intervals;

  double service_rate() const { return arrived == 0 ? 0.0 : static_cast<double>(accepted) / arrived; }
};

// Surrogate objective normalizers: expected total profit over the instance
// and network capacity per interval.
double profit_normalizer(const DemandConfig& demand, int intervals);
double capacity_normalizer(const Network& network, TimeStep duration);

// Link priorities the surrogate objective uses in this interval: 1/|A| per
// link in uniform mode, otherwise the standardized kNN prediction for the
// occupancy snapshot of the active routes at the window start.
PriorityVector surrogate_beta(const Network& network, const SurrogatePolicy& policy,
                              const IntervalContext& context);

PolicyRunReport run_myopic(const Network& network, const Instance& instance,
                           const SolverConfig& solver);

PolicyRunReport run_surrogate(const Network& network, const Instance& instance,
                              const DemandConfig& demand, const SolverConfig& solver,
                              const SurrogatePolicy& policy);

}  // namespace ddsp
