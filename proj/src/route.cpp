#include "ddsp/route.hpp"

#include <map>
#include <set>
#include <tuple>

namespace ddsp {

SpaceTimeRoute make_route(const Network& network, RequestId request, std::vector<NodeId> nodes,
                          TimeStep departure) {
  SpaceTimeRoute route;
  route.request = request;
  route.times.push_back(departure);
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    auto link = network.find_link(nodes[k - 1], nodes[k]);
    if (!link) {
      throw ModelError("no link " + std::to_string(nodes[k - 1]) + "->" + std::to_string(nodes[k]));
    }
    route.times.push_back(route.times.back() + network.link(*link).travel_time);
  }
  route.nodes = std::move(nodes);
  return route;
}

std::vector<LinkId> route_links(const Network& network, const SpaceTimeRoute& route) {
  std::vector<LinkId> out;
  for (std::size_t k = 1; k < route.nodes.size(); ++k) {
    auto link = network.find_link(route.nodes[k - 1], route.nodes[k]);
    if (!link) throw ModelError("route uses a missing link");
    out.push_back(*link);
  }
  return out;
}

std::vector<RouteTraversal> route_traversals(const Network& network, const SpaceTimeRoute& route) {
  std::vector<RouteTraversal> out;
  const auto links = route_links(network, route);
  for (std::size_t k = 0; k < links.size(); ++k) {
    out.push_back(RouteTraversal{links[k], route.times[k], route.times[k + 1]});
  }
  return out;
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kStructure: return "structure";
    case ViolationKind::kTravelTime: return "travel-time";
    case ViolationKind::kEndpoints: return "endpoints";
    case ViolationKind::kDeparture: return "departure";
    case ViolationKind::kWindow: return "window";
    case ViolationKind::kCapacityUp: return "capacity-up";
    case ViolationKind::kCapacityDown: return "capacity-down";
    case ViolationKind::kJunction: return "junction";
    case ViolationKind::kForbiddenTurn: return "forbidden-turn";
  }
  return "?";
}

std::vector<Violation> check_routes(const Network& network, std::span<const PlannedRoute> routes) {
  std::vector<Violation> out;
  // (link, t) -> count of entries / exits; (node, t) -> distinct turns in use.
  std::map<std::pair<LinkId, TimeStep>, int> entries;
  std::map<std::pair<LinkId, TimeStep>, int> exits;
  std::map<std::pair<NodeId, TimeStep>, std::set<std::pair<LinkId, LinkId>>> junctions;

  for (const PlannedRoute& planned : routes) {
    const Request& req = planned.request;
    const SpaceTimeRoute& route = planned.route;
    const auto flag = [&](ViolationKind kind, std::string detail) {
      out.push_back(Violation{kind, req.id, std::move(detail)});
    };
    if (route.nodes.size() < 2 || route.times.size() != route.nodes.size()) {
      flag(ViolationKind::kStructure, "route needs >= 2 nodes and one time per node");
      continue;
    }
    if (route.nodes.front() != req.origin || route.nodes.back() != req.destination) {
      flag(ViolationKind::kEndpoints, "route does not connect origin to destination");
    }
    bool linked = true;
    std::vector<LinkId> links;
    for (std::size_t k = 1; k < route.nodes.size(); ++k) {
      const NodeId a = route.nodes[k - 1];
      const NodeId b = route.nodes[k];
      if (k > 1 && a == req.origin) flag(ViolationKind::kStructure, "route revisits its origin");
      if (k + 1 < route.nodes.size() && a != route.nodes.front() && b == req.destination) {
        flag(ViolationKind::kStructure, "route passes through its destination");
      }
      auto link = network.find_link(a, b);
      if (!link) {
        flag(ViolationKind::kStructure,
             "no link " + std::to_string(a) + "->" + std::to_string(b));
        linked = false;
        break;
      }
      links.push_back(*link);
      if (route.times[k] != route.times[k - 1] + network.link(*link).travel_time) {
        flag(ViolationKind::kTravelTime, "time at node " + std::to_string(k) +
                                             " differs from departure + travel time");
      }
    }
    if (!linked) continue;
    if (route.departure() < req.earliest) flag(ViolationKind::kDeparture, "departs before e_r");
    if (route.arrival() < req.window_lo || route.arrival() > req.window_hi) {
      flag(ViolationKind::kWindow, "arrival " + std::to_string(route.arrival()) +
                                       " outside [" + std::to_string(req.window_lo) + "," +
                                       std::to_string(req.window_hi) + "]");
    }
    for (std::size_t k = 0; k < links.size(); ++k) {
      ++entries[{links[k], route.times[k]}];
      ++exits[{links[k], route.times[k + 1]}];
      if (k > 0) {
        if (!network.find_turn(links[k - 1], links[k])) {
          flag(ViolationKind::kForbiddenTurn, "turn at node " + std::to_string(route.nodes[k]));
        }
        junctions[{route.nodes[k], route.times[k]}].insert({links[k - 1], links[k]});
      }
    }
  }

  for (const auto& [key, count] : entries) {
    if (count > network.link(key.first).capacity) {
      out.push_back(Violation{ViolationKind::kCapacityUp, -1,
                              "link " + std::to_string(key.first) + " t=" +
                                  std::to_string(key.second) + " entries=" + std::to_string(count)});
    }
  }
  for (const auto& [key, count] : exits) {
    if (count > network.link(key.first).capacity) {
      out.push_back(Violation{ViolationKind::kCapacityDown, -1,
                              "link " + std::to_string(key.first) + " t=" +
                                  std::to_string(key.second) + " exits=" + std::to_string(count)});
    }
  }
  for (const auto& [key, turns] : junctions) {
    if (turns.size() > 1) {
      out.push_back(Violation{ViolationKind::kJunction, -1,
                              "node " + std::to_string(key.first) + " t=" +
                                  std::to_string(key.second) + " has " +
                                  std::to_string(turns.size()) + " active turns"});
    }
  }
  return out;
}

}  // namespace ddsp
