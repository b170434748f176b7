#include "ddsp/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

namespace ddsp {

TimeStep travel_steps(double length, double velocity) {
  // Guard against representation noise, e.g. 7.5/2.5 landing at 3.0000000001.
  const double ratio = length / velocity;
  const double rounded = std::round(ratio);
  const double steps =
      std::abs(ratio - rounded) < 1e-9 ? rounded : std::ceil(ratio);
  return std::max(1, static_cast<TimeStep>(steps));
}

Network Network::build(std::vector<Node> nodes, std::vector<LinkSpec> links,
                       double velocity, bool allow_u_turns) {
  if (!(velocity > 0.0) || !std::isfinite(velocity)) {
    throw ModelError("network velocity must be positive");
  }
  Network net;
  net.velocity_ = velocity;
  net.allow_u_turns_ = allow_u_turns;

  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != static_cast<NodeId>(i)) {
      throw ModelError("node ids must be dense 0..N-1");
    }
    if (!std::isfinite(nodes[i].x) || !std::isfinite(nodes[i].y)) {
      throw ModelError("node " + std::to_string(i) + " has non-finite coordinates");
    }
  }
  net.nodes_ = std::move(nodes);

  std::sort(links.begin(), links.end(),
            [](const LinkSpec& a, const LinkSpec& b) { return a.id < b.id; });
  const auto n = static_cast<NodeId>(net.nodes_.size());
  net.outgoing_.assign(n, {});
  net.incoming_.assign(n, {});
  for (std::size_t i = 0; i < links.size(); ++i) {
    const LinkSpec& s = links[i];
    const std::string tag = "link " + std::to_string(s.id);
    if (s.id != static_cast<LinkId>(i)) throw ModelError("link ids must be dense 0..M-1");
    if (s.tail < 0 || s.tail >= n || s.head < 0 || s.head >= n) {
      throw ModelError(tag + " references a missing node");
    }
    if (s.tail == s.head) throw ModelError(tag + " is a self loop");
    if (!(s.length > 0.0) || !std::isfinite(s.length)) {
      throw ModelError(tag + " has non-positive length");
    }
    if (s.capacity < 1) throw ModelError(tag + " has non-positive capacity");
    net.links_.push_back(Link{s.id, s.tail, s.head, s.length, s.capacity,
                              travel_steps(s.length, velocity)});
    net.outgoing_[s.tail].push_back(s.id);
    net.incoming_[s.head].push_back(s.id);
  }

  net.turns_ = enumerate_turns(net, allow_u_turns);

  // All-pairs free-flow times; travel times are time invariant so static
  // Dijkstra equals the earliest arrival on the empty time-expanded graph.
  net.free_flow_.assign(static_cast<std::size_t>(n) * n, -1);
  using Item = std::pair<TimeStep, NodeId>;
  for (NodeId src = 0; src < n; ++src) {
    std::vector<TimeStep> dist(n, std::numeric_limits<TimeStep>::max());
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[src] = 0;
    queue.emplace(0, src);
    while (!queue.empty()) {
      auto [d, u] = queue.top();
      queue.pop();
      if (d != dist[u]) continue;
      for (LinkId l : net.outgoing_[u]) {
        const Link& link = net.links_[l];
        if (d + link.travel_time < dist[link.head]) {
          dist[link.head] = d + link.travel_time;
          queue.emplace(dist[link.head], link.head);
        }
      }
    }
    for (NodeId dst = 0; dst < n; ++dst) {
      if (dist[dst] != std::numeric_limits<TimeStep>::max()) {
        net.free_flow_[static_cast<std::size_t>(src) * n + dst] = dist[dst];
      }
    }
  }
  return net;
}

std::optional<TurnId> Network::find_turn(LinkId in_link, LinkId out_link) const {
  const NodeId junction = links_.at(in_link).head;
  for (TurnId t : turns_.by_node[junction]) {
    const Turn& turn = turns_.turns[t];
    if (turn.in_link == in_link && turn.out_link == out_link) return t;
  }
  return std::nullopt;
}

std::optional<LinkId> Network::find_link(NodeId tail, NodeId head) const {
  for (LinkId l : outgoing_.at(tail)) {
    if (links_[l].head == head) return l;
  }
  return std::nullopt;
}

TimeStep Network::max_travel_time() const {
  TimeStep best = 0;
  for (const Link& l : links_) best = std::max(best, l.travel_time);
  return best;
}

int Network::total_capacity() const {
  int total = 0;
  for (const Link& l : links_) total += l.capacity;
  return total;
}

std::optional<TimeStep> Network::free_flow_time(NodeId from, NodeId to) const {
  const TimeStep t = free_flow_.at(static_cast<std::size_t>(from) * nodes_.size() + to);
  if (t < 0) return std::nullopt;
  return t;
}

TurnTable enumerate_turns(const Network& network, bool allow_u_turns) {
  TurnTable table;
  table.by_node.assign(network.node_count(), {});
  for (const Node& node : network.nodes()) {
    for (LinkId in : network.incoming(node.id)) {
      for (LinkId out : network.outgoing(node.id)) {
        const bool u_turn = network.link(out).head == network.link(in).tail;
        if (u_turn && !allow_u_turns) continue;
        const auto id = static_cast<TurnId>(table.turns.size());
        table.turns.push_back(Turn{id, in, out, node.id});
        table.by_node[node.id].push_back(id);
      }
    }
  }
  table.conflicts.resize(table.turns.size());
  for (const Turn& turn : table.turns) {
    for (TurnId other : table.by_node[turn.junction]) {
      if (other != turn.id) table.conflicts[turn.id].push_back(other);
    }
  }
  return table;
}

TimeExpandedGraph::TimeExpandedGraph(const Network& network, TimeStep horizon)
    : network_(&network), horizon_(horizon) {
  if (horizon < 1) throw ModelError("time-expanded graph needs horizon >= 1");
  const std::size_t levels = static_cast<std::size_t>(horizon) + 1;
  offsets_.assign(network.node_count() * levels + 1, 0);
  for (const Node& node : network.nodes()) {
    for (TimeStep t = 0; t <= horizon; ++t) {
      offsets_[node.id * levels + t] = arcs_.size();
      for (LinkId l : network.outgoing(node.id)) {
        const TimeStep arrive = t + network.link(l).travel_time;
        if (arrive <= horizon) arcs_.push_back(SpaceTimeArc{l, t, arrive});
      }
    }
  }
  offsets_.back() = arcs_.size();
}

std::span<const SpaceTimeArc> TimeExpandedGraph::arcs_from(NodeId n, TimeStep t) const {
  if (t < 0 || t > horizon_) return {};
  const std::size_t levels = static_cast<std::size_t>(horizon_) + 1;
  const std::size_t slot = static_cast<std::size_t>(n) * levels + t;
  return std::span<const SpaceTimeArc>(arcs_).subspan(offsets_[slot],
                                                       offsets_[slot + 1] - offsets_[slot]);
}

TimeExpandedGraph expand_time(const Network& network, TimeStep horizon) {
  return TimeExpandedGraph(network, horizon);
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

}  // namespace

Network read_network(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int expected_nodes = 0;
  int expected_links = 0;
  double velocity = 0.0;
  bool u_turns = true;
  std::vector<Node> nodes;
  std::vector<LinkSpec> links;
  auto fail = [&](const std::string& what) {
    throw ModelError("network line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(strip_comment(line));
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "NODES") {
      std::string links_kw;
      std::string vel_kw;
      if (!(ss >> expected_nodes >> links_kw >> expected_links >> vel_kw >> velocity) ||
          links_kw != "LINKS" || vel_kw != "VELOCITY") {
        fail("expected 'NODES <n> LINKS <m> VELOCITY <v>'");
      }
      have_header = true;
    } else if (tag == "UTURNS") {
      int flag = 1;
      if (!(ss >> flag)) fail("expected 'UTURNS 0|1'");
      u_turns = flag != 0;
    } else if (tag == "N") {
      Node n;
      if (!(ss >> n.id >> n.x >> n.y)) fail("expected 'N <id> <x> <y>'");
      nodes.push_back(n);
    } else if (tag == "L") {
      LinkSpec l;
      if (!(ss >> l.id >> l.tail >> l.head >> l.length >> l.capacity)) {
        fail("expected 'L <id> <tail> <head> <length> <capacity>'");
      }
      std::string extra;
      if (ss >> extra) fail("per-link speeds are not supported (single global velocity)");
      links.push_back(l);
    } else {
      fail("unknown record '" + tag + "'");
    }
    std::string trailing;
    if (tag != "L" && (ss >> trailing)) fail("trailing data '" + trailing + "'");
  }
  if (!have_header) throw ModelError("network file has no NODES header");
  if (static_cast<int>(nodes.size()) != expected_nodes ||
      static_cast<int>(links.size()) != expected_links) {
    throw ModelError("network header counts do not match records");
  }
  return Network::build(std::move(nodes), std::move(links), velocity, u_turns);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open network file " + path);
  return read_network(in);
}

void write_network(std::ostream& out, const Network& network) {
  out.precision(17);
  out << "NODES " << network.node_count() << " LINKS " << network.link_count()
      << " VELOCITY " << network.velocity() << '\n';
  if (!network.allow_u_turns()) out << "UTURNS 0\n";
  for (const Node& n : network.nodes()) out << "N " << n.id << ' ' << n.x << ' ' << n.y << '\n';
  for (const Link& l : network.links()) {
    out << "L " << l.id << ' ' << l.tail << ' ' << l.head << ' ' << l.length << ' '
        << l.capacity << '\n';
  }
}

}  // namespace ddsp
