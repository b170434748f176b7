#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ddsp/milp.hpp"
#include "ddsp/solver.hpp"
#include "helpers.hpp"

using namespace ddsp;
using test::request;

namespace {

MilpModel plain_model(std::vector<double> objective) {
  MilpModel m;
  for (std::size_t c = 0; c < objective.size(); ++c) {
    Column col;
    col.ref = VariableRef{VarKind::kAccept, static_cast<RequestId>(c), -1, 0};
    col.name = variable_name(col.ref);
    col.objective = objective[c];
    m.columns.push_back(col);
  }
  m.rebuild_index();
  return m;
}

MilpModel myopic(const Network& net, const std::vector<Request>& reqs, TimeStep duration = 4) {
  IntervalContext ctx;
  ctx.duration = duration;
  ctx.current = reqs;
  MilpModel m = build_interval_model(net, ctx);
  set_objective(m, net, ObjectiveMode::kMyopic);
  return m;
}

}  // namespace

TEST_CASE("unconstrained single column is set to one") {
  MilpModel m = plain_model({5.0});
  auto res = solve(m, SolverConfig{});
  CHECK(res.status == SolveStatus::kOptimal);
  CHECK(res.objective == 5.0);
  REQUIRE(res.assignment.size() == 1);
  CHECK(res.assignment[0] == 1);
}

TEST_CASE("contradictory equalities are infeasible") {
  MilpModel m = plain_model({1.0});
  m.rows.push_back({"one", Sense::kEq, {{0, 1.0}}, 1.0});
  m.rows.push_back({"zero", Sense::kEq, {{0, 1.0}}, 0.0});
  auto res = solve(m, SolverConfig{});
  CHECK(res.status == SolveStatus::kInfeasible);
  CHECK_FALSE(res.has_solution());
}

TEST_CASE("generic search handles knapsack-like rows") {
  // max 3a + 4b + 5c - d  s.t. a + b + c <= 2, c - d <= 0, a + b >= 1
  MilpModel m = plain_model({3, 4, 5, -1});
  m.rows.push_back({"cap", Sense::kLe, {{0, 1}, {1, 1}, {2, 1}}, 2});
  m.rows.push_back({"link", Sense::kLe, {{2, 1}, {3, -1}}, 0});
  m.rows.push_back({"cover", Sense::kGe, {{0, 1}, {1, 1}}, 1});
  auto res = solve(m, SolverConfig{});
  REQUIRE(res.status == SolveStatus::kOptimal);
  CHECK(res.objective == doctest::Approx(*test::enumerate_model_optimum(m)));
  CHECK(res.objective == doctest::Approx(8.0));
}

TEST_CASE("generic search agrees with enumeration on random models") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coef(-3, 3);
  for (int k = 0; k < 60; ++k) {
    const int n = 4 + k % 9;
    std::vector<double> obj;
    for (int c = 0; c < n; ++c) obj.push_back(coef(rng));
    MilpModel m = plain_model(obj);
    const int rows = 1 + k % 5;
    for (int r = 0; r < rows; ++r) {
      Row row{"r" + std::to_string(r), static_cast<Sense>(coef(rng) & 1 ? 0 : 2), {}, double(coef(rng))};
      for (int c = 0; c < n; ++c) {
        const int a = coef(rng);
        if (a != 0 && coef(rng) > 0) row.terms.emplace_back(c, a);
      }
      m.rows.push_back(row);
    }
    auto truth = test::enumerate_model_optimum(m);
    auto res = solve(m, SolverConfig{});
    if (!truth) {
      CHECK(res.status == SolveStatus::kInfeasible);
    } else {
      REQUIRE(res.status == SolveStatus::kOptimal);
      CHECK(res.objective == doctest::Approx(*truth));
      CHECK(m.violations(res.assignment).empty());
    }
  }
}

TEST_CASE("oracle examples") {
  Network net = test::path_network({2.0});
  SUBCASE("one feasible request earns its profit") {
    auto r = brute_force_oracle(net, {request(0, 0, 1, 0, 2, 4, 6)}, 10);
    CHECK(r.feasible);
    CHECK(r.profit == 6.0);
    REQUIRE(r.routes.count(0));
    CHECK(r.combinations == 4);  // three departures plus reject
  }
  SUBCASE("two requests forced onto one capacity-1 link") {
    auto r = brute_force_oracle(net, {request(0, 0, 1, 0, 2, 2, 4), request(1, 0, 1, 0, 2, 2, 9)}, 10);
    CHECK(r.profit == 9.0);
    CHECK(r.routes.size() == 1);
    CHECK(r.routes.count(1));
  }
  SUBCASE("no requests") {
    auto r = brute_force_oracle(net, std::vector<Request>{}, 10);
    CHECK(r.profit == 0.0);
    CHECK(r.routes.empty());
  }
  SUBCASE("space too large") {
    Network wide = test::path_network({1.0});
    std::vector<Request> many;
    for (int k = 0; k < 8; ++k) many.push_back(request(k, 0, 1, 0, 1, 40));
    CHECK_THROWS_AS(brute_force_oracle(wide, many, 40, 1000), SolverError);
  }
}

TEST_CASE("route enumeration matches the reference enumerator") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    auto inst = test::tiny_instance(rng);
    for (const Request& r : inst.requests) {
      auto a = enumerate_routes(inst.network, r, 0, inst.horizon);
      auto b = test::all_routes(inst.network, r);
      std::sort(a.begin(), a.end(), [](auto& x, auto& y) { return std::tie(x.times, x.nodes) < std::tie(y.times, y.nodes); });
      std::sort(b.begin(), b.end(), [](auto& x, auto& y) { return std::tie(x.times, x.nodes) < std::tie(y.times, y.nodes); });
      CHECK(a == b);
    }
  }
}

TEST_CASE("builtin solver equals the oracle on random tiny instances") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 60; ++k) {
    auto inst = test::tiny_instance(rng);
    MilpModel m = myopic(inst.network, inst.requests, 1 + k % 6);
    CHECK(m.column_count() <= 400);
    auto res = solve(m, SolverConfig{});
    auto truth = brute_force_oracle(inst.network, inst.requests, m.window_end);
    REQUIRE(res.status == SolveStatus::kOptimal);
    CHECK(res.objective == doctest::Approx(truth.profit));
  }
}

TEST_CASE("builtin solver equals the oracle with idle and active commitments") {
  std::mt19937_64 rng(77);
  int compared = 0;
  for (int k = 0; k < 80; ++k) {
    auto inst = test::tiny_instance(rng, 4, 6, 3, 12);
    // Plan interval 1 over the first requests, then roll to interval 2.
    const TimeStep duration = 2 + k % 3;
    MilpModel first = myopic(inst.network, inst.requests, duration);
    auto plan = solve(first, SolverConfig{});
    REQUIRE(plan.status == SolveStatus::kOptimal);
    auto routes = decode_routes(inst.network, first, plan.assignment);

    IntervalContext ctx;
    ctx.interval = 2;
    ctx.duration = duration;
    std::vector<OracleRequest> oracle;
    for (const Request& r : inst.requests) {
      auto it = routes.find(r.id);
      if (it == routes.end()) continue;
      if (it->second.arrival() < ctx.window_start()) continue;  // done
      if (it->second.departure() <= ctx.window_start()) {
        ctx.active.push_back(r);
        ctx.active_routes[r.id] = it->second;
        oracle.push_back({r, true, it->second});
      } else {
        ctx.idle.push_back(r);
        ctx.idle_routes[r.id] = it->second;
        oracle.push_back({r, true, std::nullopt});
      }
    }
    // Fresh requests submitted during interval 2.
    auto extra = test::tiny_instance(rng, 4, 6, 2, 12);
    for (const Request& r0 : extra.requests) {
      Request r = r0;
      if (r.origin >= static_cast<NodeId>(inst.network.node_count()) ||
          r.destination >= static_cast<NodeId>(inst.network.node_count()) ||
          !inst.network.free_flow_time(r.origin, r.destination)) {
        continue;
      }
      r.id = 100 + r0.id;
      r.earliest = std::max(r.earliest, ctx.window_start());
      r.window_lo = std::max(r.window_lo, r.earliest + *inst.network.free_flow_time(r.origin, r.destination));
      r.window_hi = std::max(r.window_hi, r.window_lo);
      ctx.current.push_back(r);
      oracle.push_back({r, false, std::nullopt});
    }
    MilpModel m = build_interval_model(inst.network, ctx);
    apply_rolling_modifications(m, ctx);
    set_objective(m, inst.network, ObjectiveMode::kMyopic);
    auto res = solve(m, SolverConfig{});
    auto truth = brute_force_oracle(inst.network, oracle, m.window_start, m.window_end);
    REQUIRE(truth.feasible);
    REQUIRE(res.status == SolveStatus::kOptimal);
    CHECK(res.objective == doctest::Approx(truth.profit));
    ++compared;
  }
  CHECK(compared == 80);
}

TEST_CASE("node budget truncates deterministically with a feasible incumbent") {
  std::mt19937_64 rng(99);
  auto inst = test::tiny_instance(rng, 4, 6, 3, 12);
  MilpModel m = myopic(inst.network, inst.requests, 3);
  SolverConfig cfg;
  cfg.node_limit = 2;
  auto a = solve(m, cfg);
  auto b = solve(m, cfg);
  REQUIRE(a.has_solution());
  CHECK(m.violations(a.assignment).empty());
  CHECK(a.assignment == b.assignment);
  CHECK(a.objective == doctest::Approx(m.evaluate(a.assignment)));
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.time_limit = 0;
  CHECK_THROWS_AS(cfg.validate(), SolverError);
  cfg.time_limit = 1;
  cfg.backend = SolverBackend::kExternal;
  CHECK_THROWS_AS(solve(plain_model({1.0}), cfg), SolverError);
}

TEST_CASE("LP export is explicit, deterministic and round-trips") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    auto inst = test::tiny_instance(rng);
    MilpModel m = myopic(inst.network, inst.requests, 3);
    SurrogateParams p;
    p.alpha = 0.7;
    p.beta.assign(inst.network.link_count(), 0.5);
    p.profit_normalizer = 12.5;
    p.capacity_normalizer = inst.network.total_capacity() * 3.0;
    set_objective(m, inst.network, ObjectiveMode::kSurrogate, &p);
    const std::string text = export_lp_text(m);
    CHECK(text.find("Maximize") != std::string::npos);
    CHECK(text == export_lp_text(m));
    MilpModel back = import_lp_text(text);
    CHECK(back.column_count() == m.column_count());
    CHECK(back.row_count() == m.row_count());
    CHECK(back.objective_offset == m.objective_offset);
    for (std::size_t c = 0; c < m.column_count(); ++c) {
      CHECK(back.columns[c].name == m.columns[c].name);
      CHECK(back.columns[c].ref == m.columns[c].ref);
      CHECK(back.columns[c].objective == m.columns[c].objective);
    }
    CHECK(export_lp_text(back) == text);
    // Without the route structure the generic search reaches the same optimum.
    auto a = solve(m, SolverConfig{});
    auto b = solve(back, SolverConfig{});
    REQUIRE(a.status == SolveStatus::kOptimal);
    REQUIRE(b.status == SolveStatus::kOptimal);
    CHECK(b.objective == doctest::Approx(a.objective).epsilon(1e-9));
  }
}

TEST_CASE("LP import understands common variants") {
  const std::string text =
      "\\ comment\n"
      "Minimize\n cost: 2 x + 3 y - z\n"
      "Subject To\n c1: x + y >= 1\n -z + x <= 0\n c3: y + z =< 1\n"
      "Bounds\n 0 <= x <= 1\n z = 0\n"
      "Binary\n x y z\nEnd\n";
  MilpModel m = import_lp_text(text);
  REQUIRE(m.column_count() == 3);
  CHECK(m.row_count() == 3);
  CHECK(m.columns[0].objective == -2.0);  // minimization stored as maximization
  CHECK(m.columns[2].upper == 0.0);
  auto res = solve(m, SolverConfig{});
  REQUIRE(res.status == SolveStatus::kOptimal);
  // z = 0 forces x = 0 through the unnamed row, so y carries the cover.
  CHECK(res.objective == -3.0);
  CHECK(res.assignment == std::vector<std::uint8_t>{0, 1, 0});
  CHECK_THROWS_AS(import_lp_text("Maximize\n obj: x\nSubject To\n c: x <= \nEnd\n"), SolverError);
}

TEST_CASE("solution parsing accepts name/value and indexed formats") {
  MilpModel m = plain_model({1, 1, 1});
  auto patterns = default_solution_patterns();
  auto a = parse_solution_text("Objective 2\nz_r0 1\nz_r1 0\nz_r2 1.0000001\nc1 5\n", m, patterns);
  CHECK(a == std::vector<std::uint8_t>{1, 0, 1});
  auto b = parse_solution_text("x[0] = 0\nx[1] = 1\nx[2] = 1\n", m, patterns);
  CHECK(b == std::vector<std::uint8_t>{0, 1, 1});
  auto c = parse_solution_text("   0 z_r0   1   0\n   1 z_r1  -0   1\n   2 z_r2 1 0\n", m, patterns);
  CHECK(c == std::vector<std::uint8_t>{1, 0, 1});
  CHECK_THROWS_AS(parse_solution_text("nothing useful here\n", m, patterns), SolverError);
}

TEST_CASE("external adapter round-trips through files") {
  MilpModel m = plain_model({2.0, 3.0});
  m.rows.push_back({"one", Sense::kLe, {{0, 1}, {1, 1}}, 1});
  SolverConfig cfg;
  cfg.backend = SolverBackend::kExternal;
  // A stand-in solver that checks the LP file exists and answers z_r1.
  cfg.command_template = "test -s {in} && grep -q Maximize {in} && printf 'optimal\\nz_r0 0\\nz_r1 1\\n' > {out}";
  auto res = solve(m, cfg);
  CHECK(res.status == SolveStatus::kOptimal);
  CHECK(res.objective == 3.0);

  cfg.command_template = "printf 'infeasible\\n' > {out}";
  CHECK(solve(m, cfg).status == SolveStatus::kInfeasible);

  cfg.command_template = "printf 'time limit reached\\nz_r0 1\\nz_r1 1\\n' > {out}";
  auto bad = solve(m, cfg);
  CHECK(bad.status == SolveStatus::kError);  // violates the row
  CHECK_FALSE(bad.has_solution());

  cfg.command_template = "exit 3";
  CHECK_THROWS_AS(solve(m, cfg), SolverError);
  cfg.command_template = "true";
  CHECK_THROWS_AS(solve(m, cfg), SolverError);
}
