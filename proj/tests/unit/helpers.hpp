#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/network.hpp"

namespace ddsp::test {

inline Request request(RequestId id, NodeId o, NodeId d, TimeStep e, TimeStep l, TimeStep u,
                       int profit = 1) {
  Request r;
  r.id = id;
  r.origin = o;
  r.destination = d;
  r.submitted = 0;
  r.earliest = e;
  r.window_lo = l;
  r.window_hi = u;
  r.profit = profit;
  return r;
}

// Directed path 0 -> 1 -> ... -> n-1 with the given link lengths.
inline Network path_network(const std::vector<double>& lengths, int capacity = 1,
                            double velocity = 1.0) {
  std::vector<Node> nodes;
  std::vector<LinkSpec> links;
  for (std::size_t i = 0; i <= lengths.size(); ++i) {
    nodes.push_back(Node{static_cast<NodeId>(i), static_cast<double>(i), 0.0});
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    links.push_back(LinkSpec{static_cast<LinkId>(i), static_cast<NodeId>(i),
                             static_cast<NodeId>(i + 1), lengths[i], capacity});
  }
  return Network::build(nodes, links, velocity);
}

// Random strongly-ish connected small network without parallel links.
inline Network random_network(std::mt19937_64& rng, int nodes, int links, int max_travel,
                              int capacity = 1, bool u_turns = true) {
  std::vector<Node> ns;
  for (int i = 0; i < nodes; ++i) ns.push_back(Node{i, double(i % 2), double(i)});
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < nodes; ++a) {
    for (int b = 0; b < nodes; ++b) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::uniform_int_distribution<int> len(1, max_travel);
  std::vector<LinkSpec> ls;
  for (int l = 0; l < links && l < static_cast<int>(pairs.size()); ++l) {
    ls.push_back(LinkSpec{l, pairs[l].first, pairs[l].second, double(len(rng)), capacity});
  }
  return Network::build(ns, ls, 1.0, u_turns);
}

}  // namespace ddsp::test

#include <functional>
#include <map>
#include <tuple>

#include "ddsp/reservation.hpp"

namespace ddsp::test {

// Every space-time route of the request that departs in [e, u - 1] and ends
// in [l, u]; plain depth-first enumeration without reuse of library search code.
inline std::vector<SpaceTimeRoute> all_routes(const Network& net, const Request& r) {
  std::vector<SpaceTimeRoute> out;
  std::vector<NodeId> nodes;
  std::vector<TimeStep> times;
  std::function<void(NodeId, TimeStep)> dfs = [&](NodeId n, TimeStep t) {
    if (n == r.destination) {
      if (t >= r.window_lo && t <= r.window_hi) {
        out.push_back(SpaceTimeRoute{r.id, nodes, times});
      }
      return;
    }
    for (const Link& l : net.links()) {
      if (l.tail != n || l.head == r.origin) continue;
      if (*net.find_link(l.tail, l.head) != l.id) continue;
      if (t + l.travel_time > r.window_hi) continue;
      if (nodes.size() >= 2) {
        auto in = net.find_link(nodes[nodes.size() - 2], n);
        if (!net.find_turn(*in, l.id)) continue;
      }
      nodes.push_back(l.head);
      times.push_back(t + l.travel_time);
      dfs(l.head, t + l.travel_time);
      nodes.pop_back();
      times.pop_back();
    }
  };
  for (TimeStep t0 = std::max(0, r.earliest); t0 < r.window_hi; ++t0) {
    nodes = {r.origin};
    times = {t0};
    dfs(r.origin, t0);
  }
  return out;
}

}  // namespace ddsp::test

#include "ddsp/milp.hpp"
#include "ddsp/solver.hpp"

namespace ddsp::test {

// Maximum of the model objective over every binary assignment; nullopt if
// none is feasible. Only for models with a handful of columns.
inline std::optional<double> enumerate_model_optimum(const MilpModel& model) {
  const std::size_t n = model.column_count();
  if (n > 22) throw std::invalid_argument("model too large to enumerate");
  std::optional<double> best;
  std::vector<std::uint8_t> x(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (std::size_t c = 0; c < n; ++c) x[c] = (mask >> c) & 1;
    if (!model.violations(x).empty()) continue;
    const double v = model.evaluate(x);
    if (!best || v > *best) best = v;
  }
  return best;
}

struct TinyInstance {
  Network network;
  std::vector<Request> requests;
  TimeStep horizon = 0;
};

// Random instance within the oracle's reach: <= max_nodes nodes, <= max_links
// links, <= max_requests requests, windows inside [0, horizon] and a route
// combination space of at most max_space.
inline TinyInstance tiny_instance(std::mt19937_64& rng, int max_nodes = 4, int max_links = 6,
                                  int max_requests = 3, TimeStep horizon = 12,
                                  double max_space = 1e6) {
  std::uniform_int_distribution<int> pick(0, 1 << 30);
  for (;;) {
    const int nodes = 2 + pick(rng) % (max_nodes - 1);
    const int links = std::min(nodes * (nodes - 1), 2 + pick(rng) % (max_links - 1));
    Network net = random_network(rng, nodes, links, 3, 1 + (pick(rng) % 4 == 0), pick(rng) % 2);
    std::vector<Request> reqs;
    const int count = 1 + pick(rng) % max_requests;
    for (int k = 0; k < 40 && static_cast<int>(reqs.size()) < count; ++k) {
      const NodeId o = pick(rng) % nodes;
      const NodeId d = pick(rng) % nodes;
      if (o == d) continue;
      const auto ff = net.free_flow_time(o, d);
      if (!ff) continue;
      const TimeStep e = pick(rng) % 5;
      const TimeStep l = e + *ff + pick(rng) % 3;
      const TimeStep u = std::min<TimeStep>(l + pick(rng) % 4, horizon);
      if (l > u) continue;
      reqs.push_back(request(static_cast<RequestId>(reqs.size()), o, d, e, l, u, 1 + pick(rng) % 10));
    }
    if (reqs.empty()) continue;
    double space = 1;
    for (const Request& r : reqs) space *= 1.0 + enumerate_routes(net, r, 0, horizon).size();
    if (space > max_space) continue;
    return TinyInstance{std::move(net), std::move(reqs), horizon};
  }
}

}  // namespace ddsp::test
