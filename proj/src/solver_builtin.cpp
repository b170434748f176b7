// Builtin exact solver.
//
// Models built from the network carry a route annex; those are solved by a
// depth-first branch-and-bound whose decisions are whole routes: each request
// block either takes one space-time route (all its columns at once) or is
// rejected. Routes are produced lazily in order of (value, arrival, links,
// node sequence) by a best-first search over the block's arc DAG, restricted
// to arcs that still fit the shared capacity and junction rows. The upper
// bound of a node adds, per undecided block, the best route value that still
// fits. The tree is explored by limited-discrepancy iterations so a node
// budget cuts the search fairly, and the search is exact once an iteration
// completes without hitting its discrepancy limit.
//
// Models without an annex (e.g. read from LP text) fall back to a plain binary
// branch-and-bound with activity-bound propagation, meant for small models.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

#include "ddsp/solver.hpp"

namespace ddsp {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kFeasibleTimeLimit: return "feasible_time_limit";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kError: return "error";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(time_limit > 0.0)) throw SolverError("time limit must be positive");
  if (!(tolerance >= 0.0)) throw SolverError("tolerance must be non-negative");
  if (!(relative_gap >= 0.0)) throw SolverError("relative gap must be non-negative");
  if (backend == SolverBackend::kExternal && command_template.empty()) {
    throw SolverError("external backend needs a command template");
  }
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kSubgradientIterations = 300;

class Budget {
 public:
  Budget(std::uint64_t limit, double seconds)
      : limit_(limit),
        deadline_(Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(seconds))) {}

  bool tick() {
    ++used_;
    if (limit_ != 0 && used_ > limit_) exhausted_ = true;
    if ((used_ & 255) == 0 && Clock::now() > deadline_) exhausted_ = true;
    return !exhausted_;
  }
  bool exhausted() const { return exhausted_; }
  std::uint64_t used() const { return used_; }

 private:
  std::uint64_t limit_;
  Clock::time_point deadline_;
  std::uint64_t used_ = 0;
  bool exhausted_ = false;
};

double objective_scale(const MilpModel& model) {
  double s = 0.0;
  for (const Column& c : model.columns) s += std::abs(c.objective);
  return s;
}

// Largest g such that every objective coefficient is an integer multiple of
// g (to a relative 1e-9), or 0 if g would be below 1e-6 of the largest
// coefficient. Integer profits give g = 1; scaling the objective scales g.
double objective_granularity(const MilpModel& model) {
  double top = 0.0;
  for (const Column& c : model.columns) top = std::max(top, std::abs(c.objective));
  if (top == 0.0) return 0.0;
  const double tol = 1e-9 * top;
  double g = 0.0;
  for (const Column& c : model.columns) {
    double a = std::abs(c.objective);
    if (a <= tol) continue;
    double b = g;
    if (a < b) std::swap(a, b);
    while (b > tol) {
      double r = std::fmod(a, b);
      if (r > b - tol) r = 0.0;
      a = b;
      b = r;
    }
    g = a;
    if (g < 1e-6 * top) return 0.0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Route-structured search

// Column counts plus activities of packing rows (<= rows with non-negative
// coefficients); these are the rows shared between blocks. Packing rows free
// of shared junction columns may carry a Lagrange multiplier; the state then
// tracks the dual term sum(lambda * (rhs - activity)).
class PackingState {
 public:
  explicit PackingState(const MilpModel& model)
      : model_(model), count_(model.columns.size(), 0), rows_of_(model.columns.size()),
        cost_(model.columns.size(), 0.0) {
    for (std::size_t r = 0; r < model.rows.size(); ++r) {
      const Row& row = model.rows[r];
      if (row.sense != Sense::kLe) continue;
      bool packing = true;
      bool dualizable = true;
      for (const auto& [c, a] : row.terms) {
        packing = packing && a >= 0.0;
        dualizable = dualizable && model.columns[c].ref.kind != VarKind::kJunction;
      }
      if (!packing) continue;
      const int idx = static_cast<int>(rhs_.size());
      rhs_.push_back(row.rhs);
      activity_.push_back(0.0);
      dualizable_.push_back(dualizable);
      for (const auto& [c, a] : row.terms) rows_of_[c].emplace_back(idx, a);
    }
    lambda_.assign(rhs_.size(), 0.0);
  }

  bool fits(int c) const {
    if (count_[c] > 0) return true;
    if (model_.columns[c].upper < 0.5) return false;
    for (const auto& [r, a] : rows_of_[c]) {
      if (activity_[r] + a > rhs_[r] + 1e-9) return false;
    }
    return true;
  }

  void add(int c) {
    if (count_[c]++ == 0) {
      for (const auto& [r, a] : rows_of_[c]) activity_[r] += a;
      dual_used_ += cost_[c];
    }
  }
  void remove(int c) {
    if (--count_[c] == 0) {
      for (const auto& [r, a] : rows_of_[c]) activity_[r] -= a;
      dual_used_ -= cost_[c];
    }
  }

  std::vector<std::uint8_t> assignment() const {
    std::vector<std::uint8_t> x(count_.size());
    for (std::size_t c = 0; c < count_.size(); ++c) x[c] = count_[c] > 0;
    return x;
  }

  std::size_t row_count() const { return rhs_.size(); }
  bool dualizable(int r) const { return dualizable_[r]; }
  double rhs(int r) const { return rhs_[r]; }
  const std::vector<std::pair<int, double>>& rows_of(int c) const { return rows_of_[c]; }

  // Only while no column is set.
  void set_multipliers(std::vector<double> lambda) {
    lambda_ = std::move(lambda);
    dual_rhs_ = 0.0;
    for (std::size_t r = 0; r < rhs_.size(); ++r) {
      if (!dualizable_[r]) lambda_[r] = 0.0;
      dual_rhs_ += lambda_[r] * rhs_[r];
    }
    for (std::size_t c = 0; c < cost_.size(); ++c) {
      cost_[c] = 0.0;
      for (const auto& [r, a] : rows_of_[c]) cost_[c] += lambda_[r] * a;
    }
    dual_used_ = 0.0;
  }
  double cost(int c) const { return c >= 0 ? cost_[c] : 0.0; }
  double dual_term() const { return dual_rhs_ - dual_used_; }

 private:
  const MilpModel& model_;
  std::vector<int> count_;
  std::vector<std::vector<std::pair<int, double>>> rows_of_;
  std::vector<double> rhs_;
  std::vector<double> activity_;
  std::vector<bool> dualizable_;
  std::vector<double> lambda_;
  std::vector<double> cost_;
  double dual_rhs_ = 0.0;
  double dual_used_ = 0.0;
};

struct RouteChoice {
  std::vector<int> cols;  // accept, arc and turn columns plus junction columns
  double value = 0.0;
  double lag = 0.0;  // value less the multiplier cost of its columns
};

struct BlockData {
  const RouteBlock* block = nullptr;
  double accept_value = 0.0;
  double lag_accept = 0.0;
  bool forced = false;   // acceptance fixed to 1
  bool allowed = true;   // acceptance may be 1
  std::vector<double> arc_value;
  std::vector<std::vector<double>> turn_value;  // per arc, per successor
  std::vector<double> lag_arc;
  std::vector<std::vector<double>> lag_turn;
  std::vector<int> order;                       // arcs by descending departure
  RouteChoice pinned;
  double static_best = kNegInf;
};

// Best completion values (multiplier-adjusted) of a block's arcs given the
// current state.
struct Completion {
  std::vector<double> best;  // value of the best completion starting with the arc
  std::vector<int> arrival;  // earliest reachable arrival
  std::vector<int> links;    // fewest links to the destination
  double route_best = kNegInf;
};

class RouteSearch {
 public:
  RouteSearch(const MilpModel& model, const SolverConfig& config)
      : model_(model),
        annex_(*model.annex),
        state_(model),
        budget_(config.node_limit, config.time_limit),
        eps_(1e-9 * objective_scale(model)),
        quantum_(eps_ > 0.0 ? eps_ : 1.0),
        relative_gap_(config.relative_gap) {
    prepare_blocks();
    unit_ = objective_granularity(model);
  }

  SolveResult run() {
    SolveResult result;
    const auto start = Clock::now();
    seed_from_warm_start();
    optimize_multipliers();
    bool exhaustive = false;
    for (int limit = 0; !budget_.exhausted(); ++limit) {
      limited_ = false;
      std::vector<double> ub(blocks_.size());
      for (std::size_t k = 0; k < blocks_.size(); ++k) ub[k] = blocks_[k].static_best;
      dfs(0, limit, 0.0, ub);
      if (!limited_ && !budget_.exhausted()) {
        exhaustive = true;
        break;
      }
    }
    result.nodes = budget_.used();
    result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (!has_incumbent_) {
      result.status = exhaustive ? SolveStatus::kInfeasible : SolveStatus::kError;
      if (!exhaustive) result.message = "search budget exhausted before any feasible solution";
      return result;
    }
    result.assignment = incumbent_;
    result.objective = model_.evaluate(incumbent_);
    result.status = exhaustive ? SolveStatus::kOptimal : SolveStatus::kFeasibleTimeLimit;
    return result;
  }

 private:
  void prepare_blocks() {
    std::vector<BlockData> pinned;
    std::vector<BlockData> forced;
    std::vector<BlockData> open;
    for (const RouteBlock& rb : annex_.blocks) {
      BlockData b;
      b.block = &rb;
      const Column& z = model_.columns[rb.accept_col];
      b.accept_value = z.objective;
      b.lag_accept = z.objective;
      b.forced = z.lower > 0.5;
      b.allowed = z.upper > 0.5;
      if (rb.pinned) {
        b.pinned.cols.push_back(rb.accept_col);
        b.pinned.value = z.objective;
        for (int c : rb.pinned_cols) {
          b.pinned.cols.push_back(c);
          b.pinned.value += model_.columns[c].objective;
          const int phi = junction_of(c);
          if (phi >= 0) {
            b.pinned.cols.push_back(phi);
            b.pinned.value += model_.columns[phi].objective;
          }
        }
        b.pinned.lag = b.pinned.value;
        b.static_best = b.allowed ? b.pinned.value : kNegInf;
        pinned.push_back(std::move(b));
        continue;
      }
      const std::size_t n = rb.arcs.size();
      b.arc_value.resize(n);
      b.turn_value.resize(n);
      for (std::size_t a = 0; a < n; ++a) {
        const AnnexArc& arc = rb.arcs[a];
        b.arc_value[a] = col_value(arc.up_col) + col_value(arc.down_col);
        for (const auto& [next, g] : arc.next) {
          const int phi = junction_of(g);
          b.turn_value[a].push_back(col_value(g) + (phi >= 0 ? col_value(phi) : 0.0));
        }
        b.order.push_back(static_cast<int>(a));
      }
      b.lag_arc = b.arc_value;
      b.lag_turn = b.turn_value;
      std::sort(b.order.begin(), b.order.end(), [&](int x, int y) {
        return std::tie(rb.arcs[x].depart, x) > std::tie(rb.arcs[y].depart, y);
      });
      // Static bound: no other block present. Junction values are counted in
      // full, which overestimates only if they are negative and shared.
      Completion comp = complete(b, /*use_state=*/false);
      b.static_best = b.allowed ? comp.route_best : kNegInf;
      (b.forced ? forced : open).push_back(std::move(b));
    }
    const auto by_value = [](const BlockData& x, const BlockData& y) {
      if (x.accept_value != y.accept_value) return x.accept_value > y.accept_value;
      return x.block->request < y.block->request;
    };
    std::sort(forced.begin(), forced.end(), by_value);
    std::sort(open.begin(), open.end(), by_value);
    for (auto* group : {&pinned, &forced, &open}) {
      for (BlockData& b : *group) blocks_.push_back(std::move(b));
    }
  }

  double col_value(int c) const { return c >= 0 ? model_.columns[c].objective : 0.0; }
  int junction_of(int c) const {
    return c >= 0 && static_cast<std::size_t>(c) < annex_.junction_of_turn.size()
               ? annex_.junction_of_turn[c]
               : -1;
  }

  bool arc_fits(const AnnexArc& arc) const {
    return (arc.up_col < 0 || state_.fits(arc.up_col)) &&
           (arc.down_col < 0 || state_.fits(arc.down_col));
  }
  bool turn_fits(int g) const {
    if (!state_.fits(g)) return false;
    const int phi = junction_of(g);
    return phi < 0 || state_.fits(phi);
  }

  Completion complete(const BlockData& b, bool use_state) const {
    const RouteBlock& rb = *b.block;
    Completion c;
    const std::size_t n = rb.arcs.size();
    c.best.assign(n, kNegInf);
    c.arrival.assign(n, std::numeric_limits<int>::max());
    c.links.assign(n, std::numeric_limits<int>::max());
    for (int a : b.order) {
      const AnnexArc& arc = rb.arcs[a];
      if (use_state && !arc_fits(arc)) continue;
      if (arc.terminal) {
        c.best[a] = b.lag_arc[a];
        c.arrival[a] = arc.arrive;
        c.links[a] = 1;
        continue;
      }
      double best = kNegInf;
      for (std::size_t k = 0; k < arc.next.size(); ++k) {
        const auto& [s, g] = arc.next[k];
        if (c.best[s] == kNegInf || (use_state && !turn_fits(g))) continue;
        best = std::max(best, b.lag_turn[a][k] + c.best[s]);
        c.arrival[a] = std::min(c.arrival[a], c.arrival[s]);
        c.links[a] = std::min(c.links[a], c.links[s] + 1);
      }
      if (best != kNegInf) c.best[a] = b.lag_arc[a] + best;
    }
    for (int s : rb.starts) {
      if (c.best[s] != kNegInf) c.route_best = std::max(c.route_best, b.lag_accept + c.best[s]);
    }
    return c;
  }

  // Lazily yields fitting routes of one block in key order.
  class Generator {
   public:
    Generator(RouteSearch& search, const BlockData& b)
        : s_(search), b_(b), comp_(search.complete(b, true)) {
      for (int a : b.block->starts) {
        if (comp_.best[a] == kNegInf) continue;
        const AnnexArc& arc = b.block->arcs[a];
        push(Partial{a, -1, -1, b.accept_value, b.lag_accept, 1, {arc.tail, arc.head}});
      }
    }

    double best_value() const { return comp_.route_best; }

    std::optional<RouteChoice> next() {
      while (!queue_.empty()) {
        if (!s_.budget_.tick()) return std::nullopt;
        const int p = queue_.top();
        queue_.pop();
        const Partial& part = pool_[p];
        const AnnexArc& arc = b_.block->arcs[part.arc];
        if (arc.terminal) return build(p);
        for (std::size_t k = 0; k < arc.next.size(); ++k) {
          const auto& [next, g] = arc.next[k];
          if (comp_.best[next] == kNegInf || !s_.turn_fits(g)) continue;
          const Partial& cur = pool_[p];
          Partial child{next,
                        p,
                        g,
                        cur.value + b_.arc_value[cur.arc] + b_.turn_value[cur.arc][k],
                        cur.lag + b_.lag_arc[cur.arc] + b_.lag_turn[cur.arc][k],
                        cur.links + 1,
                        cur.nodes};
          child.nodes.push_back(b_.block->arcs[next].head);
          push(std::move(child));
        }
      }
      return std::nullopt;
    }

   private:
    struct Partial {
      int arc;
      int parent;
      int turn_col;
      double value;  // accept value plus arcs and turns before `arc`
      double lag;
      int links;
      std::vector<NodeId> nodes;
    };
    struct Key {
      long long neg_bound;  // quantized so ties survive rescaling of the objective
      int arrival;
      int links;
      const std::vector<NodeId>* nodes;
    };

    Key key(int p) const {
      const Partial& part = pool_[p];
      return Key{std::llround(-(part.lag + comp_.best[part.arc]) / s_.quantum_),
                 comp_.arrival[part.arc],
                 part.links - 1 + comp_.links[part.arc], &part.nodes};
    }

    struct Later {
      const Generator* g;
      bool operator()(int x, int y) const {
        const Key a = g->key(x);
        const Key b = g->key(y);
        if (a.neg_bound != b.neg_bound) return a.neg_bound > b.neg_bound;
        if (a.arrival != b.arrival) return a.arrival > b.arrival;
        if (a.links != b.links) return a.links > b.links;
        if (*a.nodes != *b.nodes) return *a.nodes > *b.nodes;
        return x > y;
      }
    };

    void push(Partial p) {
      pool_.push_back(std::move(p));
      queue_.push(static_cast<int>(pool_.size()) - 1);
    }

    RouteChoice build(int p) const {
      RouteChoice route;
      const Partial& last = pool_[p];
      route.value = last.value + b_.arc_value[last.arc];
      route.lag = last.lag + b_.lag_arc[last.arc];
      route.cols.push_back(b_.block->accept_col);
      for (int q = p; q >= 0; q = pool_[q].parent) {
        const AnnexArc& arc = b_.block->arcs[pool_[q].arc];
        if (arc.up_col >= 0) route.cols.push_back(arc.up_col);
        if (arc.down_col >= 0) route.cols.push_back(arc.down_col);
        const int g = pool_[q].turn_col;
        if (g >= 0) {
          route.cols.push_back(g);
          const int phi = s_.junction_of(g);
          if (phi >= 0) route.cols.push_back(phi);
        }
      }
      return route;
    }

    RouteSearch& s_;
    const BlockData& b_;
    Completion comp_;
    std::vector<Partial> pool_;
    std::priority_queue<int, std::vector<int>, Later> queue_{Later{this}};
  };

  bool apply(const RouteChoice& route) {
    std::size_t k = 0;
    for (; k < route.cols.size(); ++k) {
      if (!state_.fits(route.cols[k])) break;
      state_.add(route.cols[k]);
    }
    if (k == route.cols.size()) return true;
    while (k-- > 0) state_.remove(route.cols[k]);
    return false;
  }
  void undo(const RouteChoice& route) {
    for (auto it = route.cols.rbegin(); it != route.cols.rend(); ++it) state_.remove(*it);
  }

  double remaining_bound(std::size_t depth, const std::vector<double>& ub) const {
    double total = 0.0;
    for (std::size_t k = depth; k < blocks_.size(); ++k) {
      if (blocks_[k].forced) {
        if (ub[k] == kNegInf) return kNegInf;
        total += ub[k];
      } else if (ub[k] > 0.0) {
        total += ub[k];
      }
    }
    return total;
  }

  void offer(double value) {
    if (has_incumbent_ && value <= incumbent_value_ + eps_) return;
    std::vector<std::uint8_t> x = state_.assignment();
    if (!model_.violations(x, 1e-6).empty()) return;  // rows outside the route structure
    incumbent_ = std::move(x);
    incumbent_value_ = value;
    has_incumbent_ = true;
  }

  bool prunable(double optimistic) const {
    if (optimistic == kNegInf) return true;
    // Objective values are multiples of the granularity, when there is one.
    if (unit_ > 0.0) optimistic = std::floor(optimistic / unit_ + 1e-6) * unit_;
    if (!has_incumbent_) return false;
    const double slack =
        std::max(eps_, relative_gap_ * std::abs(incumbent_value_ + model_.objective_offset));
    return optimistic <= incumbent_value_ + slack;
  }

  void dfs(std::size_t depth, int discrepancies, double current, std::vector<double>& ub) {
    if (!budget_.tick()) return;
    if (depth == blocks_.size()) {
      offer(current);
      return;
    }
    // Tighten the bounds of undecided blocks to what still fits.
    std::vector<double> saved(ub.begin() + depth, ub.end());
    for (std::size_t k = depth + 1; k < blocks_.size(); ++k) {
      const BlockData& b = blocks_[k];
      if (!b.allowed) continue;
      if (b.block->pinned) {
        bool ok = true;
        for (int c : b.pinned.cols) ok = ok && state_.fits(c);
        ub[k] = ok ? b.pinned.lag : kNegInf;
      } else {
        ub[k] = complete(b, true).route_best;
      }
    }
    const BlockData& b = blocks_[depth];
    const auto restore = [&] { std::copy(saved.begin(), saved.end(), ub.begin() + depth); };
    double rest = remaining_bound(depth + 1, ub);
    if (rest == kNegInf) return restore();
    rest += state_.dual_term();

    const auto within = [&](int cost) {
      if (cost <= discrepancies) return true;
      limited_ = true;
      return false;
    };
    const auto try_route = [&](const RouteChoice& route, int cost) {
      if (prunable(current + route.lag + rest)) return;
      if (!apply(route)) return;
      dfs(depth + 1, discrepancies - cost, current + route.value, ub);
      undo(route);
    };
    const auto try_reject = [&](int cost) {
      if (prunable(current + rest)) return;
      dfs(depth + 1, discrepancies - cost, current, ub);
    };

    if (b.block->pinned || !b.allowed) {
      int cost = 0;
      if (b.allowed) {
        try_route(b.pinned, cost);
        cost = 1;
      }
      if (!b.forced && !budget_.exhausted() && within(cost)) try_reject(cost);
      return restore();
    }
    // Options in order: best route, reject, then the remaining routes; the
    // k-th option costs k discrepancies.
    Generator gen(*this, b);
    bool reject_pending = !b.forced;
    bool routes_done = false;
    int cost = 0;
    while (!budget_.exhausted()) {
      if (reject_pending && (cost == 1 || routes_done)) {
        reject_pending = false;
        if (!within(cost)) break;
        try_reject(cost);
        ++cost;
        continue;
      }
      if (routes_done) break;
      auto route = gen.next();
      // Routes come in non-increasing adjusted value; once one cannot
      // improve, none can.
      if (!route || prunable(current + route->lag + rest)) {
        routes_done = true;
        continue;
      }
      if (!within(cost)) break;
      try_route(*route, cost);
      ++cost;
    }
    restore();
  }

  void refresh_lag_values() {
    for (BlockData& b : blocks_) {
      const RouteBlock& rb = *b.block;
      b.lag_accept = b.accept_value - state_.cost(rb.accept_col);
      if (rb.pinned) {
        b.pinned.lag = b.pinned.value;
        for (int c : b.pinned.cols) b.pinned.lag -= state_.cost(c);
        continue;
      }
      for (std::size_t a = 0; a < rb.arcs.size(); ++a) {
        const AnnexArc& arc = rb.arcs[a];
        b.lag_arc[a] = b.arc_value[a] - state_.cost(arc.up_col) - state_.cost(arc.down_col);
        for (std::size_t k = 0; k < arc.next.size(); ++k) {
          const int g = arc.next[k].second;
          b.lag_turn[a][k] = b.turn_value[a][k] - state_.cost(g) - state_.cost(junction_of(g));
        }
      }
    }
  }

  // Columns of the best adjusted route of an unpinned block.
  std::vector<int> best_route_cols(const BlockData& b, const Completion& comp) const {
    const RouteBlock& rb = *b.block;
    std::vector<int> cols{rb.accept_col};
    int a = -1;
    for (int s : rb.starts) {
      if (comp.best[s] != kNegInf && (a < 0 || comp.best[s] > comp.best[a])) a = s;
    }
    while (a >= 0) {
      const AnnexArc& arc = rb.arcs[a];
      if (arc.up_col >= 0) cols.push_back(arc.up_col);
      if (arc.down_col >= 0) cols.push_back(arc.down_col);
      if (arc.terminal) break;
      int pick = -1;
      double best = kNegInf;
      for (std::size_t k = 0; k < arc.next.size(); ++k) {
        const auto& [next, g] = arc.next[k];
        if (comp.best[next] == kNegInf || !turn_fits(g)) continue;
        const double v = b.lag_turn[a][k] + comp.best[next];
        if (v > best) {
          best = v;
          pick = static_cast<int>(k);
        }
      }
      if (pick < 0) break;
      cols.push_back(arc.next[pick].second);
      a = arc.next[pick].first;
    }
    return cols;
  }

  // Subgradient ascent on the multipliers of the dualizable packing rows,
  // run once at the root; the best multipliers found are kept for the whole
  // search. Each block then contributes its best adjusted route (or zero),
  // which is a valid bound for any fixed non-negative multipliers.
  void optimize_multipliers() {
    const std::size_t m = state_.row_count();
    bool any = false;
    for (std::size_t r = 0; r < m; ++r) any = any || state_.dualizable(static_cast<int>(r));
    if (!any || blocks_.empty()) return;
    std::vector<double> lambda(m, 0.0);
    std::vector<double> best_lambda = lambda;
    double best_bound = std::numeric_limits<double>::infinity();
    double theta = 1.0;
    int stall = 0;
    const double initial_target = has_incumbent_ ? incumbent_value_ : 0.0;
    std::vector<double> usage(m);
    for (int it = 0; it < kSubgradientIterations && !budget_.exhausted(); ++it) {
      state_.set_multipliers(lambda);
      refresh_lag_values();
      double bound = state_.dual_term();
      bool infeasible = false;
      std::fill(usage.begin(), usage.end(), 0.0);
      const auto use = [&](const std::vector<int>& cols) {
        for (int c : cols) {
          for (const auto& [r, a] : state_.rows_of(c)) usage[r] += a;
        }
      };
      for (const BlockData& b : blocks_) {
        if (!budget_.tick()) break;
        if (!b.allowed) continue;
        if (b.block->pinned) {
          if (b.forced || b.pinned.lag > 0.0) {
            bound += b.pinned.lag;
            use(b.pinned.cols);
          }
          continue;
        }
        const Completion comp = complete(b, true);
        if (comp.route_best == kNegInf) {
          if (b.forced) infeasible = true;
          continue;
        }
        if (b.forced || comp.route_best > 0.0) {
          bound += comp.route_best;
          use(best_route_cols(b, comp));
        }
      }
      if (infeasible) {
        best_lambda.assign(m, 0.0);
        break;
      }
      if (it % 10 == 0) {
        lagrangian_dive(false);
        lagrangian_dive(true);
      }
      if (bound < best_bound - eps_) {
        best_bound = bound;
        best_lambda = lambda;
        stall = 0;
      } else if (++stall >= 5) {
        theta *= 0.5;
        stall = 0;
        if (theta < 1e-3) break;
      }
      // Polyak steps aim at the warm-start value rather than the improving
      // incumbent; the larger steps converge markedly better here.
      const double target = initial_target;
      if (prunable(best_bound)) break;  // the incumbent is already optimal
      double norm = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (!state_.dualizable(static_cast<int>(r))) continue;
        double g = usage[r] - state_.rhs(static_cast<int>(r));
        if (lambda[r] <= 0.0 && g < 0.0) g = 0.0;
        usage[r] = g;
        norm += g * g;
      }
      if (norm == 0.0) break;
      const double step = theta * std::max(bound - target, eps_) / norm;
      for (std::size_t r = 0; r < m; ++r) {
        if (state_.dualizable(static_cast<int>(r))) lambda[r] = std::max(0.0, lambda[r] + step * usage[r]);
      }
    }
    state_.set_multipliers(best_lambda);
    refresh_lag_values();
  }

  // Greedy pass in block order taking each block's best adjusted route that
  // still fits, if its adjusted value is positive (always, if forced). With
  // keep_warm, forced blocks keep their warm-start routes where they have one.
  void lagrangian_dive(bool keep_warm) {
    std::vector<RouteChoice> applied;
    double value = 0.0;
    bool ok = true;
    for (const BlockData& b : blocks_) {
      if (!ok || budget_.exhausted()) break;
      std::optional<RouteChoice> route;
      const std::size_t k = static_cast<std::size_t>(&b - blocks_.data());
      if (b.allowed && b.block->pinned) {
        route = b.pinned;
      } else if (keep_warm && b.forced && warm_[k]) {
        route = warm_[k];
      } else if (b.allowed) {
        Generator gen(*this, b);
        route = gen.next();
      }
      if (route && (b.forced || route->lag > 0.0) && apply(*route)) {
        value += route->value;
        applied.push_back(std::move(*route));
      } else {
        ok = !b.forced;
      }
    }
    if (ok && !budget_.exhausted()) offer(value);
    for (auto it = applied.rbegin(); it != applied.rend(); ++it) undo(*it);
  }

  void seed_from_warm_start() {
    // Pinned routes plus the previous routes of idle requests, everything
    // else rejected.
    std::vector<RouteChoice> applied;
    double value = 0.0;
    bool ok = true;
    warm_.assign(blocks_.size(), std::nullopt);
    for (const BlockData& b : blocks_) {
      if (b.block->pinned) {
        if (!b.allowed || !apply(b.pinned)) {
          ok = !b.forced && ok;
          continue;
        }
        value += b.pinned.value;
        applied.push_back(b.pinned);
        continue;
      }
      auto it = model_.warm_start.find(b.block->request);
      if (it == model_.warm_start.end() || !b.allowed) {
        ok = ok && !b.forced;
        continue;
      }
      auto route = route_from(b, it->second);
      warm_[static_cast<std::size_t>(&b - blocks_.data())] = route;
      if (!route || !apply(*route)) {
        ok = ok && !b.forced;
        continue;
      }
      value += route->value;
      applied.push_back(*route);
    }
    if (ok) offer(value);
    for (auto it = applied.rbegin(); it != applied.rend(); ++it) undo(*it);
  }

  std::optional<RouteChoice> route_from(const BlockData& b, const SpaceTimeRoute& route) const {
    const RouteBlock& rb = *b.block;
    std::map<std::tuple<NodeId, TimeStep, NodeId>, int> arc_at;
    for (std::size_t a = 0; a < rb.arcs.size(); ++a) {
      arc_at[{rb.arcs[a].tail, rb.arcs[a].depart, rb.arcs[a].head}] = static_cast<int>(a);
    }
    RouteChoice choice;
    choice.cols.push_back(rb.accept_col);
    choice.value = b.accept_value;
    int previous = -1;
    for (std::size_t k = 0; k + 1 < route.nodes.size(); ++k) {
      auto it = arc_at.find({route.nodes[k], route.times[k], route.nodes[k + 1]});
      if (it == arc_at.end()) return std::nullopt;
      const int a = it->second;
      if (rb.arcs[a].arrive != route.times[k + 1]) return std::nullopt;
      if (previous >= 0) {
        const AnnexArc& prev = rb.arcs[previous];
        int turn_index = -1;
        for (std::size_t j = 0; j < prev.next.size(); ++j) {
          if (prev.next[j].first == a) turn_index = static_cast<int>(j);
        }
        if (turn_index < 0) return std::nullopt;
        const int g = prev.next[turn_index].second;
        choice.cols.push_back(g);
        if (junction_of(g) >= 0) choice.cols.push_back(junction_of(g));
        choice.value += b.turn_value[previous][turn_index];
      } else if (rb.arcs[a].tail != route.nodes.front() ||
                 std::find(rb.starts.begin(), rb.starts.end(), a) == rb.starts.end()) {
        return std::nullopt;
      }
      choice.cols.push_back(rb.arcs[a].up_col);
      choice.cols.push_back(rb.arcs[a].down_col);
      choice.value += b.arc_value[a];
      previous = a;
    }
    if (previous < 0 || !rb.arcs[previous].terminal) return std::nullopt;
    return choice;
  }

  const MilpModel& model_;
  const RouteAnnex& annex_;
  PackingState state_;
  Budget budget_;
  double eps_;
  double quantum_;
  double relative_gap_;
  std::vector<BlockData> blocks_;
  std::vector<std::optional<RouteChoice>> warm_;  // per block
  bool limited_ = false;
  double unit_ = 0.0;
  bool has_incumbent_ = false;
  double incumbent_value_ = kNegInf;
  std::vector<std::uint8_t> incumbent_;
};

// ---------------------------------------------------------------------------
// Generic binary branch-and-bound

class GenericSearch {
 public:
  GenericSearch(const MilpModel& model, const SolverConfig& config)
      : model_(model),
        budget_(config.node_limit, config.time_limit),
        eps_(1e-9 * objective_scale(model)),
        tol_(std::max(config.tolerance, 1e-9)),
        rows_of_(model.columns.size()) {
    for (std::size_t r = 0; r < model.rows.size(); ++r) {
      for (const auto& [c, a] : model.rows[r].terms) rows_of_[c].push_back(static_cast<int>(r));
    }
  }

  SolveResult run() {
    SolveResult result;
    const auto start = Clock::now();
    std::vector<signed char> x(model_.columns.size(), -1);
    bool ok = true;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const Column& col = model_.columns[c];
      if (col.lower > col.upper + tol_ || col.lower > 1.0 + tol_ || col.upper < -tol_) ok = false;
      if (col.lower > 0.5) x[c] = 1;
      if (col.upper < 0.5) x[c] = 0;
    }
    if (ok) dfs(x);
    result.nodes = budget_.used();
    result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const bool exhaustive = !budget_.exhausted();
    if (!has_incumbent_) {
      result.status = exhaustive ? SolveStatus::kInfeasible : SolveStatus::kError;
      if (!exhaustive) result.message = "search budget exhausted before any feasible solution";
      return result;
    }
    result.assignment = incumbent_;
    result.objective = model_.evaluate(incumbent_);
    result.status = exhaustive ? SolveStatus::kOptimal : SolveStatus::kFeasibleTimeLimit;
    return result;
  }

 private:
  // Fixes variables implied by row activity bounds; false on infeasibility.
  bool propagate(std::vector<signed char>& x) const {
    for (bool changed = true; changed;) {
      changed = false;
      for (const Row& row : model_.rows) {
        double lo = 0.0;
        double hi = 0.0;
        for (const auto& [c, a] : row.terms) {
          if (x[c] >= 0) {
            lo += a * x[c];
            hi += a * x[c];
          } else {
            lo += std::min(0.0, a);
            hi += std::max(0.0, a);
          }
        }
        const bool upper = row.sense != Sense::kGe;
        const bool lower = row.sense != Sense::kLe;
        if ((upper && lo > row.rhs + tol_) || (lower && hi < row.rhs - tol_)) return false;
        for (const auto& [c, a] : row.terms) {
          if (x[c] >= 0) continue;
          // Activity range with the variable fixed to 0 and to 1.
          const double lo0 = lo - std::min(0.0, a);
          const double hi0 = hi - std::max(0.0, a);
          const double lo1 = lo0 + a;
          const double hi1 = hi0 + a;
          const bool zero_ok = !(upper && lo0 > row.rhs + tol_) && !(lower && hi0 < row.rhs - tol_);
          const bool one_ok = !(upper && lo1 > row.rhs + tol_) && !(lower && hi1 < row.rhs - tol_);
          if (!zero_ok && !one_ok) return false;
          if (zero_ok != one_ok) {
            x[c] = one_ok ? 1 : 0;
            changed = true;
            const double v = x[c];
            lo = lo0 + a * v;
            hi = hi0 + a * v;
          }
        }
      }
    }
    return true;
  }

  void dfs(std::vector<signed char> x) {
    if (!budget_.tick()) return;
    if (!propagate(x)) return;
    double value = 0.0;
    double optimistic = 0.0;
    int free_col = -1;
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double obj = model_.columns[c].objective;
      if (x[c] == 1) value += obj;
      if (x[c] < 0) {
        optimistic += std::max(0.0, obj);
        if (free_col < 0) free_col = static_cast<int>(c);
      }
    }
    if (has_incumbent_ && value + optimistic <= incumbent_value_ + eps_) return;
    if (free_col < 0) {
      std::vector<std::uint8_t> sol(x.begin(), x.end());
      if (!model_.violations(sol, tol_).empty()) return;
      incumbent_ = std::move(sol);
      incumbent_value_ = value;
      has_incumbent_ = true;
      return;
    }
    const signed char first = model_.columns[free_col].objective >= 0.0 ? 1 : 0;
    for (signed char v : {first, static_cast<signed char>(1 - first)}) {
      x[free_col] = v;
      dfs(x);
      if (budget_.exhausted()) return;
    }
  }

  const MilpModel& model_;
  Budget budget_;
  double eps_;
  double tol_;
  std::vector<std::vector<int>> rows_of_;
  bool has_incumbent_ = false;
  double incumbent_value_ = kNegInf;
  std::vector<std::uint8_t> incumbent_;
};

}  // namespace

SolveResult solve_builtin(const MilpModel& model, const SolverConfig& config) {
  config.validate();
  SolveResult result;
  if (model.annex) {
    RouteSearch search(model, config);
    result = search.run();
  } else {
    GenericSearch search(model, config);
    result = search.run();
  }
  if (result.has_solution()) {
    auto bad = model.violations(result.assignment, config.tolerance);
    if (!bad.empty()) {
      result.status = SolveStatus::kError;
      result.message = "solution violates " + bad.front();
    }
  }
  return result;
}

SolveResult solve(const MilpModel& model, const SolverConfig& config) {
  config.validate();
  return config.backend == SolverBackend::kBuiltin ? solve_builtin(model, config)
                                                   : solve_external(model, config);
}

}  // namespace ddsp
