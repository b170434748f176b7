#include <algorithm>
#include <random>

#include "doctest.h"
#include "ddsp/reservation.hpp"
#include "helpers.hpp"

using namespace ddsp;

namespace {

Request make_request(RequestId id, NodeId o, NodeId d, TimeStep e, TimeStep l, TimeStep u) {
  Request r;
  r.id = id;
  r.origin = o;
  r.destination = d;
  r.submitted = 0;
  r.earliest = e;
  r.window_lo = l;
  r.window_hi = u;
  r.profit = 1;
  return r;
}

// Square 0->1->3, 0->2->3 plus a direct slow link 0->3, all capacity 1.
Network diamond() {
  std::vector<Node> nodes{{0, 0, 0}, {1, 1, 1}, {2, 1, -1}, {3, 2, 0}};
  std::vector<LinkSpec> links{{0, 0, 1, 1, 1}, {1, 1, 3, 1, 1}, {2, 0, 2, 1, 1},
                              {3, 2, 3, 1, 1}, {4, 0, 3, 4, 1}};
  return Network::build(nodes, links, 1.0);
}

std::vector<PlannedRoute> planned(const ReservationLedger& ledger,
                                  const std::map<RequestId, Request>& requests) {
  std::vector<PlannedRoute> out;
  for (const auto& [id, route] : ledger.live_routes()) out.push_back({requests.at(id), route});
  return out;
}

}  // namespace

TEST_CASE("empty ledger gives the free-flow shortest path") {
  Network net = diamond();
  ReservationLedger ledger(net);
  TimeExpandedGraph g(net, 20);
  auto route = new_reservation(make_request(0, 0, 3, 0, 0, 20), ledger, g);
  REQUIRE(route);
  CHECK(route->nodes == std::vector<NodeId>{0, 1, 3});  // lexicographic among 2-link paths
  CHECK(route->times == std::vector<TimeStep>{0, 1, 2});
  CHECK(ledger.holds(0));
}

TEST_CASE("a fully reserved link at the only departure time fails") {
  Network net = test::path_network({2.0});
  ReservationLedger ledger(net);
  TimeExpandedGraph g(net, 10);
  // Window forces departure at exactly t=3.
  REQUIRE(new_reservation(make_request(0, 0, 1, 3, 5, 5), ledger, g));
  CHECK_FALSE(new_reservation(make_request(1, 0, 1, 0, 5, 5), ledger, g));
  // With a wider window the second request departs later.
  auto later = new_reservation(make_request(2, 0, 1, 0, 5, 6), ledger, g);
  REQUIRE(later);
  CHECK(later->departure() == 4);
}

TEST_CASE("two requests on the same OD both get checker-clean routes") {
  Network net = diamond();
  ReservationLedger ledger(net);
  TimeExpandedGraph g(net, 20);
  std::map<RequestId, Request> reqs{{0, make_request(0, 0, 3, 0, 0, 20)},
                                    {1, make_request(1, 0, 3, 0, 0, 20)}};
  auto a = new_reservation(reqs[0], ledger, g);
  auto b = new_reservation(reqs[1], ledger, g);
  REQUIRE(a);
  REQUIRE(b);
  CHECK((b->departure() > a->departure() || b->nodes != a->nodes));
  auto routes = planned(ledger, reqs);
  CHECK(check_routes(net, routes).empty());
}

TEST_CASE("reserve and empty are inverses") {
  Network net = test::path_network({1, 2});
  ReservationLedger ledger(net);
  SpaceTimeRoute r = make_route(net, 0, {0, 1, 2}, 3);
  reserve(r, ledger);
  CHECK(ledger.upstream(0, 3) == 1);
  CHECK(ledger.downstream(0, 4) == 1);
  CHECK(ledger.upstream(1, 4) == 1);
  CHECK(ledger.downstream(1, 6) == 1);
  // Exactly one junction time for a 3-node route.
  int junctions = 0;
  for (TimeStep t = 0; t < 10; ++t) junctions += ledger.junction_count(1, t);
  CHECK(junctions == 1);
  CHECK(ledger.junction_turn(1, 4).has_value());
  empty_reservation(r, ledger);
  CHECK(ledger.is_empty());
  for (TimeStep t = 0; t < 10; ++t) {
    CHECK(ledger.upstream(0, t) == 0);
    CHECK(ledger.downstream(1, t) == 0);
    CHECK(ledger.junction_count(1, t) == 0);
  }
}

TEST_CASE("capacity C admits C routes on one (link, t)") {
  for (int cap = 1; cap <= 4; ++cap) {
    Network net = test::path_network({2.0}, cap);
    ReservationLedger ledger(net);
    for (int k = 0; k < cap; ++k) reserve(make_route(net, k, {0, 1}, 0), ledger);
    SpaceTimeRoute extra = make_route(net, cap, {0, 1}, 0);
    CHECK_FALSE(ledger.can_reserve(extra));
    CHECK_THROWS_AS(reserve(extra, ledger), ReservationError);
    ledger.check_invariants();
  }
}

TEST_CASE("junction exclusivity") {
  // 0->2, 1->2, 2->3, 2->4: two different turns at node 2 at the same time conflict.
  std::vector<Node> nodes{{0, 0, 0}, {1, 0, 1}, {2, 1, 0}, {3, 2, 0}, {4, 2, 1}};
  std::vector<LinkSpec> links{{0, 0, 2, 1, 2}, {1, 1, 2, 1, 2}, {2, 2, 3, 1, 2}, {3, 2, 4, 1, 2}};
  Network net = Network::build(nodes, links, 1.0);
  ReservationLedger ledger(net);
  reserve(make_route(net, 0, {0, 2, 3}, 0), ledger);
  CHECK_FALSE(ledger.can_reserve(make_route(net, 1, {1, 2, 4}, 0)));
  CHECK(ledger.can_reserve(make_route(net, 1, {0, 2, 3}, 0)));  // same turn shares
  CHECK(ledger.can_reserve(make_route(net, 1, {1, 2, 4}, 1)));
}

TEST_CASE("emptying errors and additivity") {
  Network net = test::path_network({1, 1});
  ReservationLedger ledger(net);
  SpaceTimeRoute a = make_route(net, 0, {0, 1, 2}, 0);
  SpaceTimeRoute b = make_route(net, 1, {0, 1, 2}, 3);
  CHECK_THROWS_AS(empty_reservation(a, ledger), ReservationError);
  reserve(a, ledger);
  reserve(b, ledger);
  CHECK_THROWS_AS(reserve(b, ledger), ReservationError);
  empty_reservation(a, ledger);
  CHECK(ledger.upstream(0, 0) == 0);
  CHECK(ledger.upstream(0, 3) == 1);
  CHECK(ledger.upstream(1, 4) == 1);
  CHECK(ledger.live_routes().size() == 1);
  ledger.check_invariants();
}

TEST_CASE("randomized reserve/release matches a reference multiset") {
  std::mt19937_64 rng(5);
  Network net = test::random_network(rng, 5, 10, 3, 2);
  TimeExpandedGraph g(net, 40);
  ReservationLedger ledger(net);
  std::map<RequestId, Request> reqs;
  std::uniform_int_distribution<int> node(0, 4);
  std::uniform_int_distribution<int> start(0, 20);
  std::bernoulli_distribution release(0.4);
  for (int step = 0; step < 1000; ++step) {
    if (!ledger.is_empty() && release(rng)) {
      auto it = ledger.live_routes().begin();
      std::advance(it, rng() % ledger.live_routes().size());
      const SpaceTimeRoute route = it->second;
      empty_reservation(route, ledger);
    } else {
      const NodeId o = node(rng);
      NodeId d = node(rng);
      if (o == d) continue;
      const TimeStep e = start(rng);
      Request r = make_request(step, o, d, e, e, e + 15);
      if (new_reservation(r, ledger, g)) reqs[r.id] = r;
    }
    ledger.check_invariants();
    // Reference counts from the live multiset.
    std::map<std::pair<LinkId, TimeStep>, int> up;
    for (const auto& [id, route] : ledger.live_routes()) {
      for (const auto& tr : route_traversals(net, route)) ++up[{tr.link, tr.depart}];
    }
    for (const auto& [key, count] : up) CHECK(ledger.upstream(key.first, key.second) == count);
    auto routes = planned(ledger, reqs);
    CHECK(check_routes(net, routes).empty());
  }
}

TEST_CASE("search matches exhaustive enumeration") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 60; ++rep) {
    Network net = test::random_network(rng, 4 + rep % 2, 8, 3, 1, rep % 3 != 0);
    TimeExpandedGraph g(net, 30);
    ReservationLedger ledger(net);
    std::map<RequestId, Request> reqs;
    std::uniform_int_distribution<int> node(0, static_cast<int>(net.node_count()) - 1);
    for (int k = 0; k < 6; ++k) {
      Request r = make_request(k, node(rng), node(rng), rng() % 6, 0, 0);
      if (r.origin == r.destination) continue;
      r.window_lo = r.earliest + static_cast<TimeStep>(rng() % 6);
      r.window_hi = r.window_lo + static_cast<TimeStep>(rng() % 8);
      // Oracle: best route among all that fit the current ledger.
      std::optional<SpaceTimeRoute> best;
      for (const SpaceTimeRoute& cand : test::all_routes(net, r)) {
        if (!ledger.can_reserve(cand)) continue;
        const auto key = [](const SpaceTimeRoute& x) {
          return std::make_tuple(x.arrival(), x.nodes.size(), x.nodes);
        };
        if (!best || key(cand) < key(*best)) best = cand;
      }
      auto found = new_reservation(r, ledger, g);
      REQUIRE(found.has_value() == best.has_value());
      if (found) {
        CHECK(*found == *best);
        reqs[r.id] = r;
      }
      auto routes = planned(ledger, reqs);
      CHECK(check_routes(net, routes).empty());
    }
  }
}
