#include <algorithm>
#include <functional>
#include <numeric>

#include "ddsp/solver.hpp"

namespace ddsp {

std::vector<SpaceTimeRoute> enumerate_routes(const Network& network, const Request& request,
                                             TimeStep window_start, TimeStep horizon) {
  std::vector<SpaceTimeRoute> out;
  const TimeStep last = std::min(request.window_hi, horizon);
  std::vector<NodeId> nodes{request.origin};
  std::vector<TimeStep> times;
  std::vector<LinkId> links;

  std::function<void(TimeStep)> extend = [&](TimeStep t) {
    const NodeId at = nodes.back();
    for (LinkId l : network.outgoing(at)) {
      const Link& link = network.link(l);
      if (network.find_link(link.tail, link.head) != l) continue;
      if (link.head == request.origin) continue;
      const TimeStep arrive = t + link.travel_time;
      if (arrive > last) continue;
      if (!links.empty() && !network.find_turn(links.back(), l)) continue;
      nodes.push_back(link.head);
      times.push_back(arrive);
      links.push_back(l);
      if (link.head == request.destination) {
        if (arrive >= request.window_lo) out.push_back({request.id, nodes, times});
      } else {
        extend(arrive);
      }
      nodes.pop_back();
      times.pop_back();
      links.pop_back();
    }
  };
  for (TimeStep t0 = std::max({request.earliest, window_start, TimeStep{0}}); t0 < last; ++t0) {
    times.assign(1, t0);
    extend(t0);
  }
  return out;
}

OracleResult brute_force_oracle(const Network& network, std::span<const OracleRequest> requests,
                                TimeStep window_start, TimeStep horizon,
                                std::uint64_t max_combinations) {
  OracleResult result;
  result.feasible = false;
  std::vector<PlannedRoute> fixed;
  struct Choice {
    const OracleRequest* req;
    std::vector<SpaceTimeRoute> routes;
  };
  std::vector<Choice> open;
  long double space = 1;
  for (const OracleRequest& r : requests) {
    if (r.pinned) {
      fixed.push_back({r.request, *r.pinned});
      continue;
    }
    Choice c{&r, enumerate_routes(network, r.request, window_start, horizon)};
    space *= static_cast<long double>(c.routes.size() + (r.must_accept ? 0 : 1));
    if (space > static_cast<long double>(max_combinations)) {
      throw SolverError("oracle combination space exceeds " + std::to_string(max_combinations));
    }
    open.push_back(std::move(c));
  }
  result.combinations = static_cast<std::uint64_t>(space);
  if (!check_routes(network, fixed).empty()) return result;

  // Most profitable first so the bound prunes early.
  std::stable_sort(open.begin(), open.end(), [](const Choice& a, const Choice& b) {
    return a.req->request.profit > b.req->request.profit;
  });
  std::vector<double> rest(open.size() + 1, 0.0);
  for (std::size_t k = open.size(); k-- > 0;) rest[k] = rest[k + 1] + open[k].req->request.profit;

  std::vector<PlannedRoute> planned = fixed;
  double best = -1.0;
  std::function<void(std::size_t, double)> dfs = [&](std::size_t k, double profit) {
    if (profit + rest[k] <= best) return;
    if (k == open.size()) {
      best = profit;
      result.feasible = true;
      result.profit = profit;
      result.routes.clear();
      for (std::size_t j = fixed.size(); j < planned.size(); ++j) {
        result.routes[planned[j].request.id] = planned[j].route;
      }
      return;
    }
    const Choice& c = open[k];
    for (const SpaceTimeRoute& route : c.routes) {
      planned.push_back({c.req->request, route});
      if (check_routes(network, planned).empty()) dfs(k + 1, profit + c.req->request.profit);
      planned.pop_back();
    }
    if (!c.req->must_accept) dfs(k + 1, profit);
  };
  dfs(0, 0.0);
  return result;
}

OracleResult brute_force_oracle(const Network& network, const std::vector<Request>& requests,
                                TimeStep horizon, std::uint64_t max_combinations) {
  std::vector<OracleRequest> wrapped;
  for (const Request& r : requests) wrapped.push_back({r, false, std::nullopt});
  return brute_force_oracle(network, wrapped, 0, horizon, max_combinations);
}

}  // namespace ddsp
