#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddsp/harness.hpp"

using namespace ddsp;

namespace {

// Options shared by gen, train and run. Each maps to a config key and is
// applied after the config file.
struct ConfigOptions {
  std::string config_file;
  std::string profile;
  std::vector<std::string> sets;
  std::vector<std::string> policies;
  bool uniform_beta = false;
  std::vector<std::pair<std::string, std::optional<std::string>>> values;

  void add_value(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    values.emplace_back(key, std::nullopt);
    // Stable storage: values is fully populated before parsing starts.
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { set(key, v); }, help);
  }

  void set(const std::string& key, const std::string& v) {
    for (auto& [k, value] : values) {
      if (k == key) value = v;
    }
  }

  void attach(CLI::App* app, bool experiment) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--profile", profile, "base profile: desk or paper");
    app->add_option("--set", sets, "extra KEY=VALUE assignment (repeatable)");
    add_value(app, "--network", "network", "network file");
    add_value(app, "--capacity", "capacity", "override every link capacity");
    add_value(app, "--rate", "rate", "requests per interval (Poisson rate)");
    add_value(app, "--intervals", "intervals", "intervals per instance");
    add_value(app, "--duration", "duration", "interval length in time steps");
    add_value(app, "--seeds", "seeds", "seed list, e.g. 1-10 or 1,4,7");
    add_value(app, "--training-intervals", "training_intervals", "lookahead simulation length");
    add_value(app, "--virtual-intervals", "virtual_intervals", "virtual intervals per lookahead");
    add_value(app, "--training-seed", "training_seed", "seed of the training simulation");
    add_value(app, "--k", "k", "kNN neighbor count");
    if (!experiment) return;
    app->add_option("--policy", policies,
                    "policy (repeatable): MYOPIC, SP_CTE3, const:A, step:AxN,..., poly:A2,A1,A0, "
                    "exp:S,R,O; append @uniform for uniform beta");
    app->add_flag("--uniform-beta", uniform_beta, "use beta = 1/|A| for every surrogate policy");
    add_value(app, "--model", "model", "training dataset file (kNN model)");
    add_value(app, "--solver", "solver", "builtin or external");
    add_value(app, "--solver-cmd", "solver_cmd", "external command with {in} {out} {tl}");
    add_value(app, "--time-limit", "time_limit", "seconds per interval solve");
    add_value(app, "--node-limit", "node_limit", "builtin search nodes per solve (0 = none)");
    add_value(app, "--relative-gap", "relative_gap", "builtin relative optimality gap");
    add_value(app, "--workers", "workers", "parallel policy runs");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = ExperimentConfig::desk();
    if (!profile.empty()) apply_config_value(c, "profile", profile);
    if (!config_file.empty()) c = load_config_file(config_file, c);
    for (const auto& [key, value] : values) {
      if (value) apply_config_value(c, key, *value);
    }
    if (!policies.empty()) {
      std::string joined;
      for (const auto& p : policies) joined += p + " ";
      apply_config_value(c, "policies", joined);
    }
    if (uniform_beta) c.uniform_beta = true;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw HarnessError("--set expects KEY=VALUE, got " + s);
      apply_config_value(c, s.substr(0, eq), s.substr(eq + 1));
    }
    return c;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_gen(const ExperimentConfig& c, const std::string& out_dir) {
  const Network net = load_experiment_network(c);
  std::filesystem::create_directories(out_dir);
  for (auto seed : c.seeds) {
    const Instance inst = generate_instance(c.demand, net, c.intervals, c.duration, seed);
    const auto path = std::filesystem::path(out_dir) / ("instance_" + std::to_string(seed) + ".txt");
    save_instance_file(path.string(), inst);
    std::cout << path.string() << ": " << inst.total_requests() << " requests\n";
  }
  return 0;
}

int cmd_train(const ExperimentConfig& c, const std::string& out, bool verify) {
  const Network net = load_experiment_network(c);
  TrainingConfig tc;
  tc.demand = c.demand;
  tc.training_intervals = c.training_intervals;
  tc.virtual_intervals = c.virtual_intervals;
  tc.duration = c.duration;
  tc.intervals_per_day = c.intervals;
  tc.seed = c.training_seed;
  tc.verify = verify;
  const auto t0 = std::chrono::steady_clock::now();
  TrainingDataset data = synthesize_training_data(net, tc);
  data.k = c.k;
  if (static_cast<std::size_t>(c.k) > data.rows()) {
    throw HarnessError("k = " + std::to_string(c.k) + " exceeds the dataset's rows");
  }
  save_dataset_file(out, data);
  std::cout << out << ": " << data.rows() << " rows, " << data.feature_dim() << " features, "
            << data.target_dim() << " targets (" << seconds_since(t0) << " s)\n";
  return 0;
}

int cmd_run(ExperimentConfig c, const std::string& out) {
  if (!out.empty()) c.output_dir = out;
  if (c.output_dir.empty()) c.output_dir = "results";
  const auto t0 = std::chrono::steady_clock::now();
  const ComparisonReport report = run_experiment(c);
  write_gaps_csv(std::cout, report);
  std::cerr << "wrote " << c.output_dir << " (" << seconds_since(t0) << " s)\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<ComparisonReport> reports;
  for (const auto& d : dirs) reports.push_back(read_report_dir(d));
  const ComparisonReport merged = merge_reports(reports);
  if (!out.empty()) {
    std::string manifest = "sources =";
    for (const auto& d : dirs) manifest += " " + d;
    write_report_files(out, merged, manifest + "\n");
  }
  write_gaps_csv(std::cout, merged);
  return 0;
}

int cmd_lp_solve(const std::string& in, const std::string& out, double time_limit,
                 std::uint64_t node_limit, double relative_gap) {
  std::ifstream f(in);
  if (!f) throw SolverError("cannot open " + in);
  std::stringstream text;
  text << f.rdbuf();
  const MilpModel model = import_lp_text(text.str());
  SolverConfig sc;
  sc.time_limit = time_limit;
  sc.node_limit = node_limit;
  sc.relative_gap = relative_gap;
  const SolveResult r = solve_builtin(model, sc);
  std::ofstream o(out);
  if (!o) throw SolverError("cannot write " + out);
  switch (r.status) {
    case SolveStatus::kOptimal: o << "status optimal\n"; break;
    case SolveStatus::kFeasibleTimeLimit: o << "status feasible (time limit)\n"; break;
    case SolveStatus::kInfeasible: o << "status infeasible\n"; return 0;
    case SolveStatus::kError: o << "status error\n"; return 1;
  }
  for (std::size_t j = 0; j < model.column_count(); ++j) {
    o << model.columns[j].name << " " << static_cast<int>(r.assignment[j]) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drone delivery service planning: instances, training and policy experiments"};
  app.require_subcommand(1);

  ConfigOptions gen_opts, train_opts, run_opts;
  std::string gen_out = "instances", train_out = "model.txt", run_out, compare_out;
  bool verify = false;

  auto* gen = app.add_subcommand("gen", "generate demand instances, one file per seed");
  gen_opts.attach(gen, false);
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "synthesize the kNN training dataset");
  train_opts.attach(train, false);
  train->add_option("--out", train_out, "dataset file")->capture_default_str();
  train->add_flag("--verify", verify, "check every simulated interval's routes (slow)");

  auto* run = app.add_subcommand("run", "run policies on one instance per seed and report gaps");
  run_opts.attach(run, true);
  run->add_option("--out", run_out, "output directory (default: config output, else results)");

  std::vector<std::string> compare_dirs;
  auto* compare = app.add_subcommand("compare", "merge run directories into gap tables");
  compare->add_option("dirs", compare_dirs, "run output directories")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--out", compare_out, "write merged tables here");

  std::string lp_in, lp_out;
  double lp_time = 300.0, lp_gap = 1e-4;
  std::uint64_t lp_nodes = 0;
  auto* lp = app.add_subcommand("lp-solve", "solve an LP file with the builtin solver");
  lp->add_option("model", lp_in, "LP file")->required()->check(CLI::ExistingFile);
  lp->add_option("solution", lp_out, "solution file to write")->required();
  lp->add_option("time_limit", lp_time, "seconds")->capture_default_str();
  lp->add_option("--node-limit", lp_nodes, "search nodes (0 = none)")->capture_default_str();
  lp->add_option("--relative-gap", lp_gap, "relative optimality gap")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_opts.resolve(), gen_out);
    if (train->parsed()) return cmd_train(train_opts.resolve(), train_out, verify);
    if (run->parsed()) return cmd_run(run_opts.resolve(), run_out);
    if (compare->parsed()) return cmd_compare(compare_dirs, compare_out);
    if (lp->parsed()) return cmd_lp_solve(lp_in, lp_out, lp_time, lp_nodes, lp_gap);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
