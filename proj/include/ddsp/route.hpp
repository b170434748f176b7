#pragma once

#include <span>
#include <string>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/network.hpp"

namespace ddsp {

// Assigned space-time route of a request: node sequence [o, ..., d] and the
// time the drone is at each node. times[0] is the departure time.
struct SpaceTimeRoute {
  RequestId request = 0;
  std::vector<NodeId> nodes;
  std::vector<TimeStep> times;

  TimeStep departure() const { return times.front(); }
  TimeStep arrival() const { return times.back(); }
  std::size_t link_count() const { return nodes.empty() ? 0 : nodes.size() - 1; }

  friend bool operator==(const SpaceTimeRoute&, const SpaceTimeRoute&) = default;
};

// Builds a route from its node sequence and departure time using link
// travel times. Throws ModelError if consecutive nodes are not linked.
SpaceTimeRoute make_route(const Network& network, RequestId request, std::vector<NodeId> nodes,
                          TimeStep departure);

// Link ids along the route (first matching link between consecutive nodes).
std::vector<LinkId> route_links(const Network& network, const SpaceTimeRoute& route);

struct RouteTraversal {
  LinkId link;
  TimeStep depart;
  TimeStep arrive;
};
std::vector<RouteTraversal> route_traversals(const Network& network, const SpaceTimeRoute& route);

struct PlannedRoute {
  Request request;
  SpaceTimeRoute route;
};

enum class ViolationKind {
  kStructure,     // empty route, unlinked nodes, revisiting origin, passing destination
  kTravelTime,    // times inconsistent with link travel times
  kEndpoints,     // route does not start at o_r / end at d_r
  kDeparture,     // departs before e_r
  kWindow,        // arrival outside [l_r, u_r]
  kCapacityUp,    // more than C entries on (link, t)
  kCapacityDown,  // more than C exits on (link, t)
  kJunction,      // two distinct turns at one (node, t)
  kForbiddenTurn, // turn not allowed by the network
};

struct Violation {
  ViolationKind kind;
  RequestId request;  // -1 for shared-resource violations
  std::string detail;
};

const char* to_string(ViolationKind kind);

// Checks a set of routes against the link-based formulation semantics
// directly: route structure and timing per request, then link entry/exit
// capacities and junction exclusivity across all routes.
std::vector<Violation> check_routes(const Network& network, std::span<const PlannedRoute> routes);

}  // namespace ddsp
