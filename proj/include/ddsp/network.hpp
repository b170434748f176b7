#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddsp {

using NodeId = int;
using LinkId = int;
using TurnId = int;
using TimeStep = int;

// Raised for malformed network/instance/dataset files and invalid topologies.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;
};

// Input description of a link; travel time is derived by the network.
struct LinkSpec {
  LinkId id = 0;
  NodeId tail = 0;
  NodeId head = 0;
  double length = 0.0;
  int capacity = 1;
};

struct Link {
  LinkId id = 0;
  NodeId tail = 0;
  NodeId head = 0;
  double length = 0.0;
  int capacity = 1;
  TimeStep travel_time = 1;
};

// Ordered pair of links meeting at a junction node.
struct Turn {
  TurnId id = 0;
  LinkId in_link = 0;
  LinkId out_link = 0;
  NodeId junction = 0;
};

// Turns of a network plus, per turn, the other turns sharing its junction.
struct TurnTable {
  std::vector<Turn> turns;
  std::vector<std::vector<TurnId>> conflicts;
  std::vector<std::vector<TurnId>> by_node;
};

// ceil(length / velocity), never below one step.
TimeStep travel_steps(double length, double velocity);

// Immutable air network. Build through Network::build or read_network.
class Network {
 public:
  static Network build(std::vector<Node> nodes, std::vector<LinkSpec> links,
                       double velocity, bool allow_u_turns = true);

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Link> links() const { return links_; }
  const Node& node(NodeId n) const { return nodes_.at(n); }
  const Link& link(LinkId l) const { return links_.at(l); }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }

  std::span<const LinkId> outgoing(NodeId n) const { return outgoing_.at(n); }
  std::span<const LinkId> incoming(NodeId n) const { return incoming_.at(n); }

  double velocity() const { return velocity_; }
  bool allow_u_turns() const { return allow_u_turns_; }

  // Turns are enumerated once at build time.
  const TurnTable& turn_table() const { return turns_; }
  std::span<const Turn> turns() const { return turns_.turns; }
  // Turn id for (in_link, out_link), if that turn is allowed.
  std::optional<TurnId> find_turn(LinkId in_link, LinkId out_link) const;
  // First link m->n, if any.
  std::optional<LinkId> find_link(NodeId tail, NodeId head) const;

  TimeStep max_travel_time() const;
  int total_capacity() const;

  // Free-flow shortest travel time (no reservations). Empty if unreachable.
  std::optional<TimeStep> free_flow_time(NodeId from, NodeId to) const;
  // Row-major |N|x|N| matrix of free-flow times; -1 marks unreachable.
  const std::vector<TimeStep>& free_flow_matrix() const { return free_flow_; }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> outgoing_;
  std::vector<std::vector<LinkId>> incoming_;
  double velocity_ = 1.0;
  bool allow_u_turns_ = true;
  TurnTable turns_;
  std::vector<TimeStep> free_flow_;
};

// All turns (i in incoming(n), j in outgoing(n)) at every node, and their
// conflict sets. U-turns (j reverses i) are kept when allow_u_turns is set.
TurnTable enumerate_turns(const Network& network, bool allow_u_turns = true);

// A space-time arc: traversal of `link` departing at `depart`.
struct SpaceTimeArc {
  LinkId link = 0;
  TimeStep depart = 0;
  TimeStep arrive = 0;
};

// Time expansion of a network over time levels 0..horizon. Arc
// ((tail,t) -> (head,t+travel)) exists iff t + travel <= horizon.
class TimeExpandedGraph {
 public:
  TimeExpandedGraph(const Network& network, TimeStep horizon);

  const Network& network() const { return *network_; }
  TimeStep horizon() const { return horizon_; }
  std::size_t arc_count() const { return arcs_.size(); }
  std::span<const SpaceTimeArc> arcs() const { return arcs_; }
  // Arcs leaving space-time node (n, t).
  std::span<const SpaceTimeArc> arcs_from(NodeId n, TimeStep t) const;

 private:
  const Network* network_;
  TimeStep horizon_;
  std::vector<SpaceTimeArc> arcs_;
  std::vector<std::size_t> offsets_;  // (n * (horizon+1) + t) -> first arc
};

TimeExpandedGraph expand_time(const Network& network, TimeStep horizon);

// Line-oriented network text format:
//   NODES <n> LINKS <m> VELOCITY <v>
//   [UTURNS 0|1]
//   N <id> <x> <y>
//   L <id> <tail> <head> <length> <capacity>
// '#' starts a comment.
Network read_network(std::istream& in);
Network load_network(const std::string& path);
void write_network(std::ostream& out, const Network& network);

}  // namespace ddsp
