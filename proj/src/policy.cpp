#include "ddsp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

namespace ddsp {

AlphaProfile AlphaProfile::constant(double alpha, std::string name) {
  AlphaProfile p;
  p.name = std::move(name);
  p.kind = Kind::kConstant;
  p.value = alpha;
  return p;
}

AlphaProfile AlphaProfile::stepwise(std::vector<std::pair<double, int>> segments, std::string name) {
  AlphaProfile p;
  p.name = std::move(name);
  p.kind = Kind::kStepwise;
  p.segments = std::move(segments);
  return p;
}

AlphaProfile AlphaProfile::polynomial(double a2, double a1, double a0, std::string name) {
  AlphaProfile p;
  p.name = std::move(name);
  p.kind = Kind::kPolynomial;
  p.a2 = a2;
  p.a1 = a1;
  p.a0 = a0;
  return p;
}

AlphaProfile AlphaProfile::exponential(double scale, double rate, double offset, std::string name) {
  AlphaProfile p;
  p.name = std::move(name);
  p.kind = Kind::kExponential;
  p.scale = scale;
  p.rate = rate;
  p.offset = offset;
  return p;
}

void AlphaProfile::validate(int intervals) const {
  if (kind != Kind::kStepwise) return;
  int total = 0;
  for (const auto& [alpha, count] : segments) {
    if (count < 1) throw PolicyError("alpha profile " + name + " has an empty segment");
    total += count;
  }
  if (total != intervals) {
    throw PolicyError("alpha profile " + name + " covers " + std::to_string(total) +
                      " intervals, instance has " + std::to_string(intervals));
  }
}

double eval_alpha(const AlphaProfile& p, int t) {
  if (t < 0) throw PolicyError("negative interval index");
  switch (p.kind) {
    case AlphaProfile::Kind::kConstant:
      return p.value;
    case AlphaProfile::Kind::kStepwise: {
      int end = 0;
      for (const auto& [alpha, count] : p.segments) {
        end += count;
        if (t < end) return alpha;
      }
      throw PolicyError("interval index " + std::to_string(t) + " beyond profile " + p.name);
    }
    case AlphaProfile::Kind::kPolynomial:
      return p.a2 * t * t + p.a1 * t + p.a0;
    case AlphaProfile::Kind::kExponential:
      return p.scale * std::exp(p.rate * t) + p.offset;
  }
  return 0.0;
}

AlphaProfile named_alpha_profile(const std::string& name) {
  using A = AlphaProfile;
  if (name == "SP_CTE1") return A::constant(2.0, name);
  if (name == "SP_CTE2") return A::constant(1.5, name);
  if (name == "SP_CTE3") return A::constant(1.25, name);
  if (name == "SP_CTE4") return A::constant(1.0, name);
  if (name == "SP_CTE5") return A::constant(0.5, name);
  if (name == "SP_CTE6") return A::constant(-1.0, name);
  if (name == "SP_STP1") return A::stepwise({{1.5, 6}, {1.25, 6}}, name);
  if (name == "SP_STP2") return A::stepwise({{1.5, 8}, {1.25, 4}}, name);
  if (name == "SP_STP3") return A::stepwise({{1.5, 4}, {1.25, 4}, {1.0, 4}}, name);
  if (name == "SP_STP4") return A::stepwise({{1.5, 7}, {1.25, 3}, {1.0, 2}}, name);
  if (name == "SP_STP5") return A::stepwise({{1.25, 6}, {1.0, 6}}, name);
  if (name == "SP_STP6") return A::stepwise({{1.25, 8}, {1.0, 4}}, name);
  if (name == "SP_PLY1") return A::polynomial(0.01, -0.15545, 1.5, name);
  if (name == "SP_PLY2") return A::polynomial(-0.01, 0.06455, 1.5, name);
  if (name == "SP_PLY3") return A::polynomial(0.0, -0.04545, 1.5, name);
  if (name == "SP_PLY4") return A::exponential(1.0, -0.063, 0.5, name);
  throw PolicyError("unknown alpha profile " + name);
}

std::vector<std::string> alpha_profile_names() {
  std::vector<std::string> out;
  for (int k = 1; k <= 6; ++k) out.push_back("SP_CTE" + std::to_string(k));
  for (int k = 1; k <= 6; ++k) out.push_back("SP_STP" + std::to_string(k));
  for (int k = 1; k <= 4; ++k) out.push_back("SP_PLY" + std::to_string(k));
  return out;
}

Segregation segregate_requests(SimulationState& state, int interval, TimeStep duration) {
  const TimeStep t0 = static_cast<TimeStep>(interval - 1) * duration;
  Segregation out;
  for (auto& [id, r] : state.accepted) {
    if (state.routes.at(id).departure() <= t0) {
      out.active.push_back(r);
    } else {
      r.earliest = std::max(r.earliest, t0);
      out.idle.push_back(r);
    }
  }
  return out;
}

void remove_completed(SimulationState& state, int interval, TimeStep duration) {
  const TimeStep end = static_cast<TimeStep>(interval) * duration;
  for (auto it = state.routes.begin(); it != state.routes.end();) {
    if (it->second.arrival() <= end) {
      state.accepted.erase(it->first);
      it = state.routes.erase(it);
    } else {
      ++it;
    }
  }
}

double profit_normalizer(const DemandConfig& demand, int intervals) {
  return demand.mean_profit() * demand.rate * intervals;
}

double capacity_normalizer(const Network& network, TimeStep duration) {
  return static_cast<double>(network.total_capacity()) * duration;
}

namespace {

using ObjectiveHook = std::function<void(MilpModel&, const IntervalContext&, IntervalRecord&)>;

PolicyRunReport run_policy(const Network& network, const Instance& instance,
                           const SolverConfig& solver, const std::string& name,
                           const ObjectiveHook& set_objective_for) {
  PolicyRunReport report;
  report.policy = name;
  SimulationState state;
  const TimeStep D = instance.duration;
  for (int i = 1; i <= instance.intervals; ++i) {
    const auto fail = [&](const std::string& what) {
      throw PolicyError(name + ", seed " + std::to_string(instance.seed) + ", interval " +
                        std::to_string(i) + ": " + what);
    };
    Segregation seg = segregate_requests(state, i, D);
    IntervalContext ctx;
    ctx.interval = i;
    ctx.duration = D;
    ctx.current = instance.interval(i);
    ctx.idle = seg.idle;
    ctx.active = seg.active;
    for (const Request& r : seg.active) ctx.active_routes[r.id] = state.routes.at(r.id);
    for (const Request& r : seg.idle) ctx.idle_routes[r.id] = state.routes.at(r.id);

    IntervalRecord rec;
    rec.interval = i;
    rec.arrived = static_cast<int>(ctx.current.size());
    SolveResult result;
    MilpModel model;
    try {
      model = build_interval_model(network, ctx);
      apply_rolling_modifications(model, ctx);
      set_objective_for(model, ctx, rec);
      result = solve(model, solver);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    if (!result.has_solution()) {
      fail(std::string("solver returned ") + to_string(result.status) +
           (result.message.empty() ? "" : ": " + result.message));
    }
    rec.status = result.status;
    rec.objective = result.objective;
    rec.wall_seconds = result.wall_seconds;
    rec.nodes = result.nodes;
    rec.columns = model.column_count();

    const auto routes = decode_routes(network, model, result.assignment);
    for (const Request& r : seg.idle) {
      auto it = routes.find(r.id);
      if (it == routes.end()) fail("idle request " + std::to_string(r.id) + " lost its route");
      state.routes[r.id] = it->second;
    }
    for (const Request& r : ctx.current) {
      auto it = routes.find(r.id);
      if (it == routes.end()) continue;
      state.accepted.emplace(r.id, r);
      state.routes.emplace(r.id, it->second);
      ++rec.accepted;
      rec.profit += r.profit;
    }
    for (const Request& r : seg.active) {
      if (state.routes.at(r.id) != ctx.active_routes.at(r.id)) fail("active route changed");
    }

    std::vector<PlannedRoute> live;
    for (const auto& [id, route] : state.routes) live.push_back({state.accepted.at(id), route});
    if (auto bad = check_routes(network, live); !bad.empty()) {
      fail("live routes violate " + std::string(to_string(bad.front().kind)) + ": " +
           bad.front().detail);
    }

    state.profit += rec.profit;
    state.accepted_total += rec.accepted;
    state.interval_profits.push_back(rec.profit);
    state.interval = i;
    remove_completed(state, i, D);

    report.arrived += rec.arrived;
    report.accepted += rec.accepted;
    report.profit += rec.profit;
    report.intervals.push_back(rec);
  }
  return report;
}

}  // namespace

PolicyRunReport run_myopic(const Network& network, const Instance& instance,
                           const SolverConfig& solver) {
  return run_policy(network, instance, solver, "MYOPIC",
                    [&](MilpModel& m, const IntervalContext&, IntervalRecord&) {
                      set_objective(m, network, ObjectiveMode::kMyopic);
                    });
}

PriorityVector surrogate_beta(const Network& network, const SurrogatePolicy& policy,
                              const IntervalContext& context) {
  if (policy.beta_mode == BetaMode::kUniform) {
    return PriorityVector(network.link_count(), 1.0 / static_cast<double>(network.link_count()));
  }
  if (!policy.model) throw PolicyError("learned beta needs a kNN model");
  OccupancySnapshot snapshot(network.link_count(), 0);
  for (const auto& [id, route] : context.active_routes) {
    link_activity(network, route, context.window_start(), snapshot);
  }
  return standardize_beta(policy.model->predict(encode_features(snapshot, network)));
}

PolicyRunReport run_surrogate(const Network& network, const Instance& instance,
                              const DemandConfig& demand, const SolverConfig& solver,
                              const SurrogatePolicy& policy) {
  policy.profile.validate(instance.intervals);
  const std::size_t n = network.node_count();
  if (policy.beta_mode == BetaMode::kLearned) {
    if (!policy.model) throw PolicyError("learned beta needs a kNN model");
    if (policy.model->feature_dim() != n * n || policy.model->target_dim() != network.link_count()) {
      throw PolicyError("kNN model dimensions do not match the network");
    }
  }
  SurrogateParams params;
  params.profit_normalizer = profit_normalizer(demand, instance.intervals);
  params.capacity_normalizer = capacity_normalizer(network, instance.duration);
  if (!(params.profit_normalizer > 0.0)) {
    throw PolicyError("surrogate objective needs a positive expected total profit");
  }

  std::string name = policy.profile.name.empty() ? "SURROGATE" : policy.profile.name;
  if (policy.beta_mode == BetaMode::kUniform) name += "_UNIFORM";
  PolicyRunReport report = run_policy(
      network, instance, solver, name,
      [&](MilpModel& m, const IntervalContext& ctx, IntervalRecord& rec) {
        params.beta = surrogate_beta(network, policy, ctx);
        params.alpha = eval_alpha(policy.profile, ctx.interval - 1);
        rec.alpha = params.alpha;
        set_objective(m, network, ObjectiveMode::kSurrogate, &params);
      });
  report.objective_scale = params.profit_normalizer;
  return report;
}

}  // namespace ddsp
