#include "ddsp/milp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ddsp {

std::string variable_name(const VariableRef& ref) {
  const std::string r = "r" + std::to_string(ref.request);
  const std::string t = "_t" + std::to_string(ref.t);
  switch (ref.kind) {
    case VarKind::kUp: return "xu_" + r + "_l" + std::to_string(ref.element) + t;
    case VarKind::kDown: return "xd_" + r + "_l" + std::to_string(ref.element) + t;
    case VarKind::kTurn: return "g_" + r + "_j" + std::to_string(ref.element) + t;
    case VarKind::kJunction: return "phi_j" + std::to_string(ref.element) + t;
    case VarKind::kAccept: return "z_" + r;
  }
  return "?";
}

int MilpModel::find(const VariableRef& ref) const {
  auto it = index_.find(ref);
  return it == index_.end() ? -1 : it->second;
}

void MilpModel::rebuild_index() {
  index_.clear();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!index_.emplace(columns[c].ref, static_cast<int>(c)).second) {
      throw ModelError("duplicate column " + columns[c].name);
    }
  }
}

double MilpModel::evaluate(const std::vector<std::uint8_t>& x) const {
  double value = objective_offset;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (x[c]) value += columns[c].objective;
  }
  return value;
}

std::vector<std::string> MilpModel::violations(const std::vector<std::uint8_t>& x,
                                               double tolerance) const {
  std::vector<std::string> out;
  if (x.size() != columns.size()) {
    out.push_back("assignment size mismatch");
    return out;
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const double v = x[c];
    if (x[c] > 1 || v < columns[c].lower - tolerance || v > columns[c].upper + tolerance) {
      out.push_back("bound:" + columns[c].name);
    }
  }
  for (const Row& row : rows) {
    double activity = 0.0;
    for (const auto& [c, a] : row.terms) activity += a * x[c];
    const bool ok = row.sense == Sense::kLe   ? activity <= row.rhs + tolerance
                    : row.sense == Sense::kGe ? activity >= row.rhs - tolerance
                                              : std::abs(activity - row.rhs) <= tolerance;
    if (!ok) out.push_back(row.name);
  }
  return out;
}

void MilpModel::canonicalize() {
  std::vector<int> order(columns.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return columns[a].ref < columns[b].ref; });
  std::vector<int> remap(columns.size());
  std::vector<Column> sorted;
  sorted.reserve(columns.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    remap[order[k]] = static_cast<int>(k);
    sorted.push_back(std::move(columns[order[k]]));
  }
  columns = std::move(sorted);
  const auto map_col = [&](int c) { return c < 0 ? c : remap[c]; };
  for (Row& row : rows) {
    for (auto& term : row.terms) term.first = remap[term.first];
    std::sort(row.terms.begin(), row.terms.end());
  }
  if (annex) {
    for (RouteBlock& block : annex->blocks) {
      block.accept_col = map_col(block.accept_col);
      for (int& c : block.pinned_cols) c = map_col(c);
      for (AnnexArc& arc : block.arcs) {
        arc.up_col = map_col(arc.up_col);
        arc.down_col = map_col(arc.down_col);
        for (auto& [next, turn] : arc.next) turn = map_col(turn);
      }
    }
    std::vector<int> junction(columns.size(), -1);
    for (std::size_t c = 0; c < annex->junction_of_turn.size(); ++c) {
      if (annex->junction_of_turn[c] >= 0) {
        junction[remap[c]] = remap[annex->junction_of_turn[c]];
      }
    }
    annex->junction_of_turn = std::move(junction);
  }
  rebuild_index();
}

TimeStep IntervalContext::horizon_end() const {
  TimeStep h = interval * duration;
  for (const Request& r : current) h = std::max(h, r.window_hi);
  for (const Request& r : idle) h = std::max(h, r.window_hi);
  for (const auto& [id, route] : active_routes) h = std::max(h, route.arrival());
  return h;
}

void IntervalContext::validate() const {
  if (interval < 1 || duration < 1) throw ModelError("interval context needs i >= 1 and D >= 1");
  std::set<RequestId> seen;
  for (const auto* group : {&current, &idle, &active}) {
    for (const Request& r : *group) {
      if (!seen.insert(r.id).second) {
        throw ModelError("request " + std::to_string(r.id) + " appears in two request sets");
      }
      if (r.origin == r.destination) {
        throw ModelError("request " + std::to_string(r.id) + " has origin equal to destination");
      }
    }
  }
  for (const Request& r : active) {
    auto it = active_routes.find(r.id);
    if (it == active_routes.end()) {
      throw ModelError("active request " + std::to_string(r.id) + " has no pinned route");
    }
    const SpaceTimeRoute& route = it->second;
    if (route.nodes.size() < 2 || route.times.size() != route.nodes.size()) {
      throw ModelError("pinned route of request " + std::to_string(r.id) + " is malformed");
    }
    if (route.arrival() < window_start()) {
      throw ModelError("pinned route of request " + std::to_string(r.id) +
                       " ends before the model window");
    }
    if (route.departure() > window_start()) {
      throw ModelError("pinned route of request " + std::to_string(r.id) +
                       " has not departed; it is idle, not active");
    }
  }
}

namespace {

struct StArc {
  LinkId link;
  NodeId tail;
  NodeId head;
  TimeStep depart;
  TimeStep arrive;
};

bool canonical_link(const Network& net, LinkId l) {
  const Link& link = net.link(l);
  return *net.find_link(link.tail, link.head) == l;
}

// Space-time arcs of request r usable by some origin -> destination route in
// [t0, horizon]: forward reachable from a departure at or after e_r, backward
// reachable from an arrival inside [l_r, u_r], never entering the origin or
// leaving the destination, and connected through allowed turns.
std::vector<StArc> request_arcs(const Network& net, const Request& r, TimeStep t0,
                                TimeStep horizon) {
  const NodeId o = r.origin;
  const NodeId d = r.destination;
  const TimeStep e = std::max(r.earliest, t0);
  const std::size_t span = static_cast<std::size_t>(horizon - t0 + 1);
  const auto at = [&](NodeId n, TimeStep t) { return static_cast<std::size_t>(n) * span + (t - t0); };
  std::vector<char> fwd(net.node_count() * span, 0);
  std::vector<char> bwd(net.node_count() * span, 0);
  const auto usable = [&](LinkId l) {
    return net.link(l).head != o && canonical_link(net, l);
  };

  for (TimeStep t = e; t <= horizon; ++t) fwd[at(o, t)] = 1;
  for (TimeStep t = t0; t <= horizon; ++t) {
    for (NodeId n = 0; n < static_cast<NodeId>(net.node_count()); ++n) {
      if (!fwd[at(n, t)] || n == d) continue;
      for (LinkId l : net.outgoing(n)) {
        const TimeStep arrive = t + net.link(l).travel_time;
        if (usable(l) && arrive <= horizon) fwd[at(net.link(l).head, arrive)] = 1;
      }
    }
  }
  for (TimeStep t = std::max(r.window_lo, t0); t <= std::min(r.window_hi, horizon); ++t) {
    bwd[at(d, t)] = 1;
  }
  for (TimeStep t = horizon; t >= t0; --t) {
    for (NodeId n = 0; n < static_cast<NodeId>(net.node_count()); ++n) {
      if (n == d) continue;
      for (LinkId l : net.outgoing(n)) {
        const TimeStep arrive = t + net.link(l).travel_time;
        if (usable(l) && arrive <= horizon && bwd[at(net.link(l).head, arrive)]) {
          bwd[at(n, t)] = 1;
          break;
        }
      }
    }
  }

  std::vector<StArc> arcs;
  for (TimeStep t = t0; t <= horizon; ++t) {
    for (NodeId n = 0; n < static_cast<NodeId>(net.node_count()); ++n) {
      if (n == d || !fwd[at(n, t)]) continue;
      for (LinkId l : net.outgoing(n)) {
        const Link& link = net.link(l);
        const TimeStep arrive = t + link.travel_time;
        if (usable(l) && arrive <= horizon && bwd[at(link.head, arrive)]) {
          arcs.push_back(StArc{l, n, link.head, t, arrive});
        }
      }
    }
  }

  // Drop arcs that cannot be joined to a route through allowed turns.
  std::vector<char> alive(arcs.size(), 1);
  std::map<std::pair<NodeId, TimeStep>, std::vector<int>> leaving;
  std::map<std::pair<NodeId, TimeStep>, std::vector<int>> entering;
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    leaving[{arcs[a].tail, arcs[a].depart}].push_back(static_cast<int>(a));
    entering[{arcs[a].head, arcs[a].arrive}].push_back(static_cast<int>(a));
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      if (!alive[a]) continue;
      const StArc& arc = arcs[a];
      bool pred = arc.tail == o;
      if (!pred) {
        for (int p : entering[{arc.tail, arc.depart}]) {
          if (alive[p] && net.find_turn(arcs[p].link, arc.link)) {
            pred = true;
            break;
          }
        }
      }
      bool succ = arc.head == d;
      if (!succ) {
        for (int s : leaving[{arc.head, arc.arrive}]) {
          if (alive[s] && net.find_turn(arc.link, arcs[s].link)) {
            succ = true;
            break;
          }
        }
      }
      if (!pred || !succ) {
        alive[a] = 0;
        changed = true;
      }
    }
  }
  std::vector<StArc> kept;
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    if (alive[a]) kept.push_back(arcs[a]);
  }
  return kept;
}

class Builder {
 public:
  explicit Builder(MilpModel& model) : m_(model) {}

  int column(const VariableRef& ref) {
    auto [it, inserted] = cols_.emplace(ref, static_cast<int>(m_.columns.size()));
    if (inserted) m_.columns.push_back(Column{ref, variable_name(ref)});
    return it->second;
  }

  void row(std::string name, Sense sense, std::vector<std::pair<int, double>> terms, double rhs) {
    m_.rows.push_back(Row{std::move(name), sense, std::move(terms), rhs});
  }

 private:
  MilpModel& m_;
  std::map<VariableRef, int> cols_;
};

std::string key(const char* family, RequestId r, const char* what, int element, TimeStep t) {
  std::string s = family;
  if (r >= 0) s += "_r" + std::to_string(r);
  s += std::string("_") + what + std::to_string(element) + "_t" + std::to_string(t);
  return s;
}

}  // namespace

MilpModel build_interval_model(const Network& network, const IntervalContext& context) {
  context.validate();
  if (network.node_count() == 0 || network.link_count() == 0) {
    throw ModelError("cannot build a model on an empty network");
  }
  MilpModel model;
  model.interval = context.interval;
  model.window_start = context.window_start();
  model.window_end = context.horizon_end();
  model.slack_end = model.window_start + context.duration;
  model.annex.emplace();
  const TimeStep t0 = model.window_start;
  const TimeStep horizon = model.window_end;

  Builder b(model);
  RouteAnnex& annex = *model.annex;
  std::map<int, int> junction_of_turn;  // turn column -> junction column
  std::map<std::pair<LinkId, TimeStep>, std::vector<int>> up_by_slot;
  std::map<std::pair<LinkId, TimeStep>, std::vector<int>> down_by_slot;
  std::map<std::pair<TurnId, TimeStep>, std::vector<int>> turns_by_slot;

  const auto up_ref = [](RequestId r, LinkId l, TimeStep t) {
    return VariableRef{VarKind::kUp, r, l, t};
  };
  const auto down_ref = [](RequestId r, LinkId l, TimeStep t) {
    return VariableRef{VarKind::kDown, r, l, t};
  };
  const auto add_turn = [&](RequestId r, TurnId turn, TimeStep t) {
    const int g = b.column(VariableRef{VarKind::kTurn, r, turn, t});
    const int phi = b.column(VariableRef{VarKind::kJunction, -1, turn, t});
    junction_of_turn[g] = phi;
    turns_by_slot[{turn, t}].push_back(g);
    return g;
  };
  const auto turn_rows = [&](RequestId r, TurnId turn, TimeStep t, int g, int down_in, int up_out) {
    b.row(key("h", r, "j", turn, t), Sense::kLe, {{g, 1.0}, {down_in, -1.0}}, 0.0);
    b.row(key("i", r, "j", turn, t), Sense::kLe, {{g, 1.0}, {up_out, -1.0}}, 0.0);
    b.row(key("j", r, "j", turn, t), Sense::kGe, {{g, 1.0}, {down_in, -1.0}, {up_out, -1.0}},
          -1.0);
  };

  // Current and idle requests: full routing structure.
  std::vector<std::pair<const Request*, RequestRole>> open;
  for (const Request& r : context.current) open.emplace_back(&r, RequestRole::kCurrent);
  for (const Request& r : context.idle) open.emplace_back(&r, RequestRole::kIdle);
  std::sort(open.begin(), open.end(),
            [](const auto& a, const auto& c) { return a.first->id < c.first->id; });
  for (const auto& [req_ptr, role] : open) {
    const Request& r = *req_ptr;
    model.requests.push_back(ModelRequest{r.id, role, r.profit});
    RouteBlock block;
    block.request = r.id;
    block.accept_col = b.column(VariableRef{VarKind::kAccept, r.id, -1, 0});
    const std::vector<StArc> arcs = request_arcs(network, r, t0, horizon);

    std::map<std::pair<NodeId, TimeStep>, std::vector<int>> leaving;
    std::vector<std::pair<int, double>> origin_terms;
    std::vector<std::pair<int, double>> destination_terms;
    std::map<std::pair<NodeId, TimeStep>, std::vector<std::pair<int, double>>> flow;
    for (const StArc& arc : arcs) {
      AnnexArc a;
      a.link = arc.link;
      a.tail = arc.tail;
      a.head = arc.head;
      a.depart = arc.depart;
      a.arrive = arc.arrive;
      a.up_col = b.column(up_ref(r.id, arc.link, arc.depart));
      a.down_col = b.column(down_ref(r.id, arc.link, arc.arrive));
      a.terminal = arc.head == r.destination;
      up_by_slot[{arc.link, arc.depart}].push_back(a.up_col);
      down_by_slot[{arc.link, arc.arrive}].push_back(a.down_col);
      b.row(key("d", r.id, "l", arc.link, arc.depart), Sense::kEq,
            {{a.down_col, 1.0}, {a.up_col, -1.0}}, 0.0);
      if (arc.tail == r.origin) {
        origin_terms.emplace_back(a.up_col, 1.0);
        block.starts.push_back(static_cast<int>(block.arcs.size()));
      } else {
        flow[{arc.tail, arc.depart}].emplace_back(a.up_col, -1.0);
      }
      if (a.terminal) {
        destination_terms.emplace_back(a.down_col, 1.0);
      } else {
        flow[{arc.head, arc.arrive}].emplace_back(a.down_col, 1.0);
      }
      leaving[{arc.tail, arc.depart}].push_back(static_cast<int>(block.arcs.size()));
      block.arcs.push_back(std::move(a));
    }
    for (AnnexArc& a : block.arcs) {
      if (a.terminal) continue;
      for (int s : leaving[{a.head, a.arrive}]) {
        const AnnexArc& next = block.arcs[s];
        auto turn = network.find_turn(a.link, next.link);
        if (!turn) continue;
        const int g = add_turn(r.id, *turn, a.arrive);
        turn_rows(r.id, *turn, a.arrive, g, a.down_col, next.up_col);
        a.next.emplace_back(s, g);
      }
    }

    // Departure equals acceptance; arrival in the window equals departure.
    auto b_terms = origin_terms;
    b_terms.emplace_back(block.accept_col, -1.0);
    b.row("b_r" + std::to_string(r.id), Sense::kEq, std::move(b_terms), 0.0);
    auto c_terms = destination_terms;
    for (const auto& [c, a] : origin_terms) c_terms.emplace_back(c, -a);
    b.row("c_r" + std::to_string(r.id), Sense::kEq, std::move(c_terms), 0.0);
    for (auto& [slot, terms] : flow) {
      b.row(key("g", r.id, "n", slot.first, slot.second), Sense::kEq, std::move(terms), 0.0);
    }
    annex.blocks.push_back(std::move(block));
  }

  // Active requests: the remaining in-window part of the pinned route.
  std::vector<const Request*> active;
  for (const Request& r : context.active) active.push_back(&r);
  std::sort(active.begin(), active.end(),
            [](const Request* a, const Request* c) { return a->id < c->id; });
  for (const Request* rp : active) {
    const Request& r = *rp;
    model.requests.push_back(ModelRequest{r.id, RequestRole::kActive, r.profit});
    const SpaceTimeRoute& route = context.active_routes.at(r.id);
    RouteBlock block;
    block.request = r.id;
    block.pinned = true;
    block.accept_col = b.column(VariableRef{VarKind::kAccept, r.id, -1, 0});
    const auto traversals = route_traversals(network, route);
    std::vector<int> up(traversals.size(), -1);
    std::vector<int> down(traversals.size(), -1);
    for (std::size_t k = 0; k < traversals.size(); ++k) {
      const RouteTraversal& tr = traversals[k];
      if (tr.depart >= t0) {
        up[k] = b.column(up_ref(r.id, tr.link, tr.depart));
        up_by_slot[{tr.link, tr.depart}].push_back(up[k]);
        block.pinned_cols.push_back(up[k]);
      }
      if (tr.arrive >= t0) {
        down[k] = b.column(down_ref(r.id, tr.link, tr.arrive));
        down_by_slot[{tr.link, tr.arrive}].push_back(down[k]);
        block.pinned_cols.push_back(down[k]);
      }
      if (up[k] >= 0) {
        b.row(key("d", r.id, "l", tr.link, tr.depart), Sense::kEq, {{down[k], 1.0}, {up[k], -1.0}},
              0.0);
      }
      if (k > 0 && traversals[k - 1].arrive >= t0) {
        auto turn = network.find_turn(traversals[k - 1].link, tr.link);
        if (!turn) throw ModelError("pinned route of request " + std::to_string(r.id) +
                                    " takes a forbidden turn");
        const int g = add_turn(r.id, *turn, tr.depart);
        turn_rows(r.id, *turn, tr.depart, g, down[k - 1], up[k]);
        block.pinned_cols.push_back(g);
      }
    }
    annex.blocks.push_back(std::move(block));
  }

  // Shared capacity rows; a row with no more columns than capacity is implied.
  for (auto& [slot, cols] : up_by_slot) {
    if (static_cast<int>(cols.size()) <= network.link(slot.first).capacity) continue;
    std::vector<std::pair<int, double>> terms;
    for (int c : cols) terms.emplace_back(c, 1.0);
    b.row(key("e", -1, "l", slot.first, slot.second), Sense::kLe, std::move(terms),
          network.link(slot.first).capacity);
  }
  for (auto& [slot, cols] : down_by_slot) {
    if (static_cast<int>(cols.size()) <= network.link(slot.first).capacity) continue;
    std::vector<std::pair<int, double>> terms;
    for (int c : cols) terms.emplace_back(c, 1.0);
    b.row(key("f", -1, "l", slot.first, slot.second), Sense::kLe, std::move(terms),
          network.link(slot.first).capacity);
  }

  // Junction indicators and one exclusivity row per (node, t).
  const double request_count = static_cast<double>(model.requests.size());
  std::map<std::pair<NodeId, TimeStep>, std::vector<int>> junction_rows;
  for (auto& [slot, gammas] : turns_by_slot) {
    const int phi = junction_of_turn.at(gammas.front());
    std::vector<std::pair<int, double>> terms{{phi, request_count}};
    for (int g : gammas) terms.emplace_back(g, -1.0);
    b.row(key("k", -1, "j", slot.first, slot.second), Sense::kGe, std::move(terms), 0.0);
    junction_rows[{network.turns()[slot.first].junction, slot.second}].push_back(phi);
  }
  for (auto& [slot, phis] : junction_rows) {
    if (phis.size() < 2) continue;
    std::vector<std::pair<int, double>> terms;
    for (int p : phis) terms.emplace_back(p, 1.0);
    b.row(key("m", -1, "n", slot.first, slot.second), Sense::kLe, std::move(terms), 1.0);
  }

  annex.junction_of_turn.assign(model.columns.size(), -1);
  for (const auto& [g, phi] : junction_of_turn) annex.junction_of_turn[g] = phi;
  for (const auto& [id, route] : context.idle_routes) model.warm_start.emplace(id, route);
  model.canonicalize();
  return model;
}

void apply_rolling_modifications(MilpModel& model, IntervalContext& context) {
  const TimeStep t0 = context.window_start();
  for (Request& r : context.idle) r.earliest = std::max(r.earliest, t0);
  const auto fix = [&](const VariableRef& ref, const std::string& what) {
    const int c = model.find(ref);
    if (c < 0) throw ModelError("model has no column for " + what + " " + variable_name(ref));
    model.columns[c].lower = 1.0;
  };
  for (const Request& r : context.idle) fix(VariableRef{VarKind::kAccept, r.id, -1, 0}, "idle");
  for (const Request& r : context.active) {
    fix(VariableRef{VarKind::kAccept, r.id, -1, 0}, "active");
    auto it = context.active_routes.find(r.id);
    if (it == context.active_routes.end()) {
      throw ModelError("active request " + std::to_string(r.id) + " has no pinned route");
    }
    const SpaceTimeRoute& route = it->second;
    if (route.arrival() < t0) {
      throw ModelError("pinned route of request " + std::to_string(r.id) +
                       " lies before the model window");
    }
    // Unfinished portion of the active route stays as planned.
    if (!model.annex) throw ModelError("model carries no route structure for pinning");
    auto block = std::find_if(model.annex->blocks.begin(), model.annex->blocks.end(),
                              [&](const RouteBlock& rb) { return rb.request == r.id; });
    if (block == model.annex->blocks.end() || !block->pinned) {
      throw ModelError("active request " + std::to_string(r.id) + " is not pinned in the model");
    }
    for (int c : block->pinned_cols) model.columns[c].lower = 1.0;
  }
}

void SurrogateParams::validate(std::size_t link_count) const {
  if (beta.size() != link_count) throw ModelError("beta vector size differs from link count");
  for (double v : beta) {
    if (!(v >= 0.0 && v <= 1.0)) throw ModelError("beta entries must lie in [0,1]");
  }
  if (!(profit_normalizer > 0.0) || !std::isfinite(profit_normalizer)) {
    throw ModelError("profit normalizer must be positive");
  }
  if (!(capacity_normalizer > 0.0) || !std::isfinite(capacity_normalizer)) {
    throw ModelError("capacity normalizer must be positive");
  }
  if (!std::isfinite(alpha)) throw ModelError("alpha must be finite");
}

void set_objective(MilpModel& model, const Network& network, ObjectiveMode mode,
                   const SurrogateParams* params) {
  if (mode == ObjectiveMode::kSurrogate) {
    if (!params) throw ModelError("surrogate objective needs parameters");
    params->validate(network.link_count());
  }
  for (Column& c : model.columns) c.objective = 0.0;
  model.objective_offset = 0.0;
  const double profit_scale = mode == ObjectiveMode::kSurrogate ? params->profit_normalizer : 1.0;
  std::set<RequestId> open;
  for (const ModelRequest& r : model.requests) {
    if (r.role == RequestRole::kActive) continue;
    open.insert(r.id);
    const int z = model.find(VariableRef{VarKind::kAccept, r.id, -1, 0});
    model.columns[z].objective = r.profit / profit_scale;
  }
  if (mode != ObjectiveMode::kSurrogate) return;

  const double scale = params->alpha / params->capacity_normalizer;
  const TimeStep steps = model.slack_end - model.window_start;
  for (const Link& l : network.links()) {
    model.objective_offset += scale * params->beta[l.id] * l.capacity * steps;
  }
  for (Column& c : model.columns) {
    if (c.ref.kind == VarKind::kUp && open.count(c.ref.request) &&
        c.ref.t >= model.window_start && c.ref.t < model.slack_end) {
      c.objective = -scale * params->beta[c.ref.element];
    }
  }
}

std::map<RequestId, SpaceTimeRoute> decode_routes(const Network& network, const MilpModel& model,
                                                  const std::vector<std::uint8_t>& x) {
  std::map<RequestId, SpaceTimeRoute> out;
  std::map<RequestId, std::vector<const VariableRef*>> ups;
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    if (x.at(c) && model.columns[c].ref.kind == VarKind::kUp) {
      ups[model.columns[c].ref.request].push_back(&model.columns[c].ref);
    }
  }
  for (const ModelRequest& r : model.requests) {
    if (r.role == RequestRole::kActive) continue;
    const int z = model.find(VariableRef{VarKind::kAccept, r.id, -1, 0});
    if (!x.at(z)) continue;
    auto& refs = ups[r.id];
    if (refs.empty()) throw ModelError("accepted request " + std::to_string(r.id) + " has no route");
    std::sort(refs.begin(), refs.end(),
              [](const VariableRef* a, const VariableRef* c) { return a->t < c->t; });
    SpaceTimeRoute route;
    route.request = r.id;
    route.nodes.push_back(network.link(refs.front()->element).tail);
    route.times.push_back(refs.front()->t);
    for (const VariableRef* ref : refs) {
      const Link& link = network.link(ref->element);
      if (link.tail != route.nodes.back() || ref->t != route.times.back()) {
        throw ModelError("decoded route of request " + std::to_string(r.id) + " is not a path");
      }
      route.nodes.push_back(link.head);
      route.times.push_back(ref->t + link.travel_time);
    }
    out.emplace(r.id, std::move(route));
  }
  return out;
}

}  // namespace ddsp
