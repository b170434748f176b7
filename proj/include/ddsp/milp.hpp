#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/network.hpp"
#include "ddsp/route.hpp"

namespace ddsp {

// Column kinds: link entry (upstream), link exit (downstream), per-request
// turn, shared junction indicator, acceptance.
enum class VarKind : std::uint8_t { kUp = 0, kDown = 1, kTurn = 2, kJunction = 3, kAccept = 4 };

struct VariableRef {
  VarKind kind = VarKind::kAccept;
  RequestId request = -1;  // -1 for junction columns
  int element = -1;        // link id (up/down), turn id (turn/junction), -1 (accept)
  TimeStep t = 0;          // 0 for accept columns

  friend auto operator<=>(const VariableRef&, const VariableRef&) = default;
};

// Canonical LP-safe column name, e.g. "xu_r3_l10_t17", "phi_j5_t9", "z_r3".
std::string variable_name(const VariableRef& ref);

enum class Sense : std::uint8_t { kLe, kEq, kGe };

struct Column {
  VariableRef ref;
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  double objective = 0.0;
};

struct Row {
  std::string name;
  Sense sense = Sense::kLe;
  std::vector<std::pair<int, double>> terms;  // (column index, coefficient)
  double rhs = 0.0;
};

enum class RequestRole : std::uint8_t { kCurrent, kIdle, kActive };

struct ModelRequest {
  RequestId id = 0;
  RequestRole role = RequestRole::kCurrent;
  int profit = 0;
};

// Space-time structure of one request's columns, used by the route-based
// branch-and-bound. Arcs form a DAG: arc a may be followed by arc b when b
// leaves a's head at a's arrival time through an allowed turn.
struct AnnexArc {
  LinkId link = 0;
  NodeId tail = 0;
  NodeId head = 0;
  TimeStep depart = 0;
  TimeStep arrive = 0;
  int up_col = -1;    // -1 when the entry lies before the model window
  int down_col = -1;
  bool terminal = false;  // head is the destination
  std::vector<std::pair<int, int>> next;  // (arc index, turn column)
};

struct RouteBlock {
  RequestId request = 0;
  int accept_col = -1;
  bool pinned = false;           // active request: single fixed route
  std::vector<AnnexArc> arcs;    // unused when pinned
  std::vector<int> starts;       // arcs leaving the origin
  std::vector<int> pinned_cols;  // route columns of a pinned block
};

struct RouteAnnex {
  std::vector<RouteBlock> blocks;
  std::vector<int> junction_of_turn;  // turn column -> its junction column
};

class MilpModel {
 public:
  std::vector<Column> columns;
  std::vector<Row> rows;
  double objective_offset = 0.0;

  int interval = 0;
  TimeStep window_start = 0;  // (i-1)D
  TimeStep window_end = 0;    // H_i, last modelled time step
  TimeStep slack_end = 0;     // slack is summed over [window_start, slack_end)
  std::vector<ModelRequest> requests;
  std::optional<RouteAnnex> annex;
  // Previously planned routes of idle requests; a feasible warm start.
  std::map<RequestId, SpaceTimeRoute> warm_start;

  std::size_t column_count() const { return columns.size(); }
  std::size_t row_count() const { return rows.size(); }
  int find(const VariableRef& ref) const;  // -1 if absent

  double evaluate(const std::vector<std::uint8_t>& x) const;
  // Names of rows and bounds violated by x (empty if feasible).
  std::vector<std::string> violations(const std::vector<std::uint8_t>& x,
                                      double tolerance = 1e-9) const;

  // Sorts columns by VariableRef and remaps rows and annex. Called by the
  // builder; needed again only after adding columns by hand.
  void canonicalize();
  void rebuild_index();

 private:
  std::map<VariableRef, int> index_;
};

// Requests and pinned routes seen by one interval's model.
struct IntervalContext {
  int interval = 1;
  TimeStep duration = 1;
  std::vector<Request> current;  // submitted during this interval
  std::vector<Request> idle;     // accepted, not departed
  std::vector<Request> active;   // departed, en route
  std::map<RequestId, SpaceTimeRoute> active_routes;
  std::map<RequestId, SpaceTimeRoute> idle_routes;  // optional warm start

  TimeStep window_start() const { return (interval - 1) * duration; }
  // H_i = max(iD, latest window end or pinned arrival).
  TimeStep horizon_end() const;
  void validate() const;
};

// Builds the per-interval integer program over [window_start, H_i] for the
// current, idle and active requests. Columns for departures that cannot
// reach the destination in time are not generated.
MilpModel build_interval_model(const Network& network, const IntervalContext& context);

// Commitments carried between intervals: fixes acceptance of idle and active
// requests, pins the remaining columns of active routes and clamps idle
// earliest departures to the window start.
void apply_rolling_modifications(MilpModel& model, IntervalContext& context);

enum class ObjectiveMode : std::uint8_t { kMyopic, kSurrogate };

struct SurrogateParams {
  double alpha = 0.0;
  std::vector<double> beta;          // standardized link priorities in [0,1]
  double profit_normalizer = 1.0;    // p_avg * E[|R|]
  double capacity_normalizer = 1.0;  // (sum of link capacities) * D

  void validate(std::size_t link_count) const;
};

// Replaces the objective. Myopic: sum of p_r z_r over current and idle
// requests. Surrogate: normalized profit plus alpha times the beta-weighted
// normalized slack over the interval [window_start, slack_end).
void set_objective(MilpModel& model, const Network& network, ObjectiveMode mode,
                   const SurrogateParams* params = nullptr);

// Routes of the accepted current/idle requests in an assignment.
std::map<RequestId, SpaceTimeRoute> decode_routes(const Network& network, const MilpModel& model,
                                                  const std::vector<std::uint8_t>& x);

}  // namespace ddsp
