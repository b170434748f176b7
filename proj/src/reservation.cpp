#include "ddsp/reservation.hpp"

#include <algorithm>
#include <limits>

namespace ddsp {

ReservationLedger::ReservationLedger(const Network& network)
    : network_(&network),
      up_(network.link_count()),
      down_(network.link_count()),
      junctions_(network.node_count()) {}

void ReservationLedger::grow(std::vector<int>& v, TimeStep t) {
  if (static_cast<std::size_t>(t) >= v.size()) {
    v.resize(std::max<std::size_t>(t + 1, v.size() * 2), 0);
  }
}

int ReservationLedger::upstream(LinkId link, TimeStep t) const {
  const auto& v = up_.at(link);
  return t >= 0 && static_cast<std::size_t>(t) < v.size() ? v[t] : 0;
}

int ReservationLedger::downstream(LinkId link, TimeStep t) const {
  const auto& v = down_.at(link);
  return t >= 0 && static_cast<std::size_t>(t) < v.size() ? v[t] : 0;
}

std::optional<TurnId> ReservationLedger::junction_turn(NodeId node, TimeStep t) const {
  const auto& m = junctions_.at(node);
  auto it = m.find(t);
  if (it == m.end() || it->second.count == 0) return std::nullopt;
  return it->second.turn;
}

int ReservationLedger::junction_count(NodeId node, TimeStep t) const {
  const auto& m = junctions_.at(node);
  auto it = m.find(t);
  return it == m.end() ? 0 : it->second.count;
}

bool ReservationLedger::can_enter(LinkId link, TimeStep t) const {
  const Link& l = network_->link(link);
  return t >= 0 && upstream(link, t) < l.capacity &&
         downstream(link, t + l.travel_time) < l.capacity;
}

bool ReservationLedger::junction_allows(NodeId node, TimeStep t, TurnId turn) const {
  auto active = junction_turn(node, t);
  return !active || *active == turn;
}

std::vector<ReservationLedger::Step> ReservationLedger::steps_of(
    const SpaceTimeRoute& route) const {
  std::vector<Step> steps;
  if (route.nodes.size() < 2 || route.times.size() != route.nodes.size()) {
    throw ReservationError("malformed route for request " + std::to_string(route.request));
  }
  for (std::size_t k = 1; k < route.nodes.size(); ++k) {
    auto link = network_->find_link(route.nodes[k - 1], route.nodes[k]);
    if (!link) throw ReservationError("route uses a missing link");
    const TimeStep depart = route.times[k - 1];
    if (route.times[k] != depart + network_->link(*link).travel_time) {
      throw ReservationError("route times disagree with travel times");
    }
    TurnId turn = -1;
    if (!steps.empty()) {
      auto t = network_->find_turn(steps.back().link, *link);
      if (!t) throw ReservationError("route takes a forbidden turn");
      turn = *t;
    }
    steps.push_back(Step{*link, depart, route.times[k], turn});
  }
  return steps;
}

bool ReservationLedger::can_reserve(const SpaceTimeRoute& route) const {
  if (holds(route.request)) return false;
  for (const Step& s : steps_of(route)) {
    if (!can_enter(s.link, s.depart)) return false;
    if (s.turn_in >= 0 && !junction_allows(network_->link(s.link).tail, s.depart, s.turn_in)) {
      return false;
    }
  }
  return true;
}

void ReservationLedger::reserve(const SpaceTimeRoute& route) {
  if (holds(route.request)) {
    throw ReservationError("request " + std::to_string(route.request) + " already reserved");
  }
  if (!can_reserve(route)) {
    throw ReservationError("reserving request " + std::to_string(route.request) +
                           " would exceed capacity or block a junction");
  }
  for (const Step& s : steps_of(route)) {
    grow(up_[s.link], s.depart);
    grow(down_[s.link], s.arrive);
    ++up_[s.link][s.depart];
    ++down_[s.link][s.arrive];
    if (s.turn_in >= 0) {
      Junction& j = junctions_[network_->link(s.link).tail][s.depart];
      j.turn = s.turn_in;
      ++j.count;
    }
  }
  live_.emplace(route.request, route);
}

void ReservationLedger::release(RequestId request) {
  auto it = live_.find(request);
  if (it == live_.end()) {
    throw ReservationError("request " + std::to_string(request) + " holds no reservation");
  }
  for (const Step& s : steps_of(it->second)) {
    --up_[s.link][s.depart];
    --down_[s.link][s.arrive];
    if (s.turn_in >= 0) {
      auto& m = junctions_[network_->link(s.link).tail];
      auto j = m.find(s.depart);
      if (--j->second.count == 0) m.erase(j);
    }
  }
  live_.erase(it);
}

const SpaceTimeRoute& ReservationLedger::route_of(RequestId request) const {
  auto it = live_.find(request);
  if (it == live_.end()) {
    throw ReservationError("request " + std::to_string(request) + " holds no reservation");
  }
  return it->second;
}

void ReservationLedger::check_invariants() const {
  ReservationLedger fresh(*network_);
  for (const auto& [id, route] : live_) fresh.reserve(route);  // throws on any conflict
  const auto same = [](const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t t = 0; t < n; ++t) {
      const int x = t < a.size() ? a[t] : 0;
      const int y = t < b.size() ? b[t] : 0;
      if (x != y) return false;
    }
    return true;
  };
  for (std::size_t l = 0; l < up_.size(); ++l) {
    if (!same(up_[l], fresh.up_[l]) || !same(down_[l], fresh.down_[l])) {
      throw ReservationError("link counters disagree with live routes on link " +
                             std::to_string(l));
    }
  }
  for (std::size_t n = 0; n < junctions_.size(); ++n) {
    if (junctions_[n].size() != fresh.junctions_[n].size()) {
      throw ReservationError("junction records disagree at node " + std::to_string(n));
    }
    for (const auto& [t, j] : junctions_[n]) {
      auto it = fresh.junctions_[n].find(t);
      if (it == fresh.junctions_[n].end() || it->second.turn != j.turn ||
          it->second.count != j.count) {
        throw ReservationError("junction records disagree at node " + std::to_string(n));
      }
    }
  }
}

namespace {

struct Label {
  int links = 0;
  std::vector<NodeId> path;
  TimeStep departure = 0;
  bool set = false;
};

bool better(int links, const std::vector<NodeId>& path, const Label& current) {
  if (!current.set) return true;
  if (links != current.links) return links < current.links;
  return path < current.path;
}

}  // namespace

std::optional<SpaceTimeRoute> find_reservation(const Request& request,
                                               const ReservationLedger& ledger,
                                               const TimeExpandedGraph& graph) {
  const Network& net = ledger.network();
  const NodeId o = request.origin;
  const NodeId d = request.destination;
  if (o == d) return std::nullopt;
  auto tau_min = net.free_flow_time(o, d);
  if (!tau_min) return std::nullopt;
  const TimeStep t_first = std::max<TimeStep>(request.earliest, 0);
  const TimeStep t_last = std::min(request.window_hi - *tau_min, graph.horizon());
  const TimeStep t_end = std::min(request.window_hi, graph.horizon());
  if (t_last < t_first) return std::nullopt;

  const auto remaining = [&](NodeId n) {
    auto t = net.free_flow_time(n, d);
    return t ? *t : std::numeric_limits<TimeStep>::max() / 4;
  };
  const auto canonical = [&](LinkId l) {
    const Link& link = net.link(l);
    return *net.find_link(link.tail, link.head) == l;
  };

  // labels[(depart - t_first) * |A| + link]: best prefix entering `link` at `depart`.
  const std::size_t links = net.link_count();
  const std::size_t span = static_cast<std::size_t>(t_end - t_first + 1);
  std::vector<Label> labels(span * links);
  const auto slot = [&](LinkId l, TimeStep t) -> Label& {
    return labels[static_cast<std::size_t>(t - t_first) * links + l];
  };

  for (TimeStep t = t_first; t <= t_last; ++t) {
    for (const SpaceTimeArc& arc : graph.arcs_from(o, t)) {
      const NodeId head = net.link(arc.link).head;
      if (!canonical(arc.link) || !ledger.can_enter(arc.link, t)) continue;
      if (arc.arrive + remaining(head) > request.window_hi) continue;
      Label& lab = slot(arc.link, t);
      std::vector<NodeId> path{o, head};
      if (better(1, path, lab)) lab = Label{1, std::move(path), t, true};
    }
  }

  Label best;
  TimeStep best_arrival = std::numeric_limits<TimeStep>::max();
  for (TimeStep t = t_first; t <= t_end; ++t) {
    for (std::size_t l = 0; l < links; ++l) {
      const Label& lab = slot(static_cast<LinkId>(l), t);
      if (!lab.set) continue;
      const Link& in = net.link(static_cast<LinkId>(l));
      const NodeId n = in.head;
      const TimeStep at = t + in.travel_time;
      if (n == d) {
        if (at >= request.window_lo && at <= request.window_hi &&
            (at < best_arrival || (at == best_arrival && better(lab.links, lab.path, best)))) {
          best = lab;
          best_arrival = at;
        }
        continue;
      }
      for (const SpaceTimeArc& arc : graph.arcs_from(n, at)) {
        const NodeId next = net.link(arc.link).head;
        if (next == o || !canonical(arc.link)) continue;
        if (arc.arrive + remaining(next) > request.window_hi) continue;
        auto turn = net.find_turn(in.id, arc.link);
        if (!turn || !ledger.junction_allows(n, at, *turn) || !ledger.can_enter(arc.link, at)) {
          continue;
        }
        Label& target = slot(arc.link, at);
        if (target.set && target.links < lab.links + 1) continue;
        std::vector<NodeId> path = lab.path;
        path.push_back(next);
        if (better(lab.links + 1, path, target)) {
          target = Label{lab.links + 1, std::move(path), lab.departure, true};
        }
      }
    }
  }
  if (!best.set) return std::nullopt;
  return make_route(net, request.id, best.path, best.departure);
}

std::optional<SpaceTimeRoute> new_reservation(const Request& request, ReservationLedger& ledger,
                                              const TimeExpandedGraph& graph) {
  auto route = find_reservation(request, ledger, graph);
  if (route) ledger.reserve(*route);
  return route;
}

void reserve(const SpaceTimeRoute& route, ReservationLedger& ledger) { ledger.reserve(route); }

void empty_reservation(const SpaceTimeRoute& route, ReservationLedger& ledger) {
  if (!ledger.holds(route.request) || !(ledger.route_of(route.request) == route)) {
    throw ReservationError("route of request " + std::to_string(route.request) +
                           " is not reserved");
  }
  ledger.release(route.request);
}

}  // namespace ddsp
