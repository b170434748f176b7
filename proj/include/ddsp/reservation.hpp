#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddsp/route.hpp"

namespace ddsp {

// Raised when a reservation would break capacity or junction exclusivity, or
// when releasing a route that is not reserved. Callers are expected to check
// first (can_reserve), so this signals a programming error.
class ReservationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Space-time occupancy of the network.
//
// Occupancy is event based: a drone entering link l at t takes one unit of the
// upstream capacity of (l, t) and one unit of the downstream capacity of
// (l, t + travel). A drone turning at node n at time t claims the junction
// (n, t) for that turn; several drones may share a junction only when they make
// the same turn.
class ReservationLedger {
 public:
  explicit ReservationLedger(const Network& network);

  const Network& network() const { return *network_; }

  int upstream(LinkId link, TimeStep t) const;
  int downstream(LinkId link, TimeStep t) const;
  std::optional<TurnId> junction_turn(NodeId node, TimeStep t) const;
  int junction_count(NodeId node, TimeStep t) const;

  bool can_enter(LinkId link, TimeStep t) const;
  bool junction_allows(NodeId node, TimeStep t, TurnId turn) const;
  bool can_reserve(const SpaceTimeRoute& route) const;

  void reserve(const SpaceTimeRoute& route);
  void release(RequestId request);

  bool holds(RequestId request) const { return live_.count(request) != 0; }
  const SpaceTimeRoute& route_of(RequestId request) const;
  const std::map<RequestId, SpaceTimeRoute>& live_routes() const { return live_; }
  bool is_empty() const { return live_.empty(); }

  // Throws ReservationError if any counter is out of range or disagrees with
  // the live route set.
  void check_invariants() const;

 private:
  struct Junction {
    TurnId turn = -1;
    int count = 0;
  };
  struct Step {
    LinkId link;
    TimeStep depart;
    TimeStep arrive;
    TurnId turn_in;  // turn taken at the tail, -1 at the origin
  };
  std::vector<Step> steps_of(const SpaceTimeRoute& route) const;
  static void grow(std::vector<int>& v, TimeStep t);

  const Network* network_;
  std::vector<std::vector<int>> up_;    // [link][t]
  std::vector<std::vector<int>> down_;  // [link][t]
  std::vector<std::map<TimeStep, Junction>> junctions_;  // [node]
  std::map<RequestId, SpaceTimeRoute> live_;
};

// Earliest-arrival feasible route for the request given current reservations,
// searched on the time-expanded graph. Ties: fewer links, then lexicographic
// node sequence. Returns nothing if no route exists; does not reserve.
std::optional<SpaceTimeRoute> find_reservation(const Request& request,
                                               const ReservationLedger& ledger,
                                               const TimeExpandedGraph& graph);

// find_reservation followed by reserve on success.
std::optional<SpaceTimeRoute> new_reservation(const Request& request, ReservationLedger& ledger,
                                              const TimeExpandedGraph& graph);

void reserve(const SpaceTimeRoute& route, ReservationLedger& ledger);
void empty_reservation(const SpaceTimeRoute& route, ReservationLedger& ledger);

}  // namespace ddsp
