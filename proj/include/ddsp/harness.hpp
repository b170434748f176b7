#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/learning.hpp"
#include "ddsp/network.hpp"
#include "ddsp/policy.hpp"
#include "ddsp/solver.hpp"

namespace ddsp {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One policy of an experiment. Text forms:
//   MYOPIC
//   SP_CTE1 .. SP_PLY4             named alpha profiles
//   const:A                        constant alpha
//   step:A1xN1,A2xN2,...           stepwise alpha, N intervals per segment
//   poly:A2,A1,A0                  A2 t^2 + A1 t + A0
//   exp:S,R,O                      S e^(R t) + O
// A surrogate form may end in "@uniform" to use beta = 1/|A|.
struct PolicySpec {
  std::string label;  // canonical text form, used in reports
  bool myopic = true;
  AlphaProfile profile;
  BetaMode beta = BetaMode::kLearned;
};

PolicySpec parse_policy_spec(const std::string& text);

// "1-10", "1,4,7" or mixtures such as "1-3,8".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct ExperimentConfig {
  std::string profile = "desk";
  std::string network_path;
  int capacity = 0;  // > 0 overrides every link capacity
  DemandConfig demand;
  int intervals = 12;
  TimeStep duration = 5;
  std::vector<std::uint64_t> seeds{1};
  std::vector<PolicySpec> policies;
  bool uniform_beta = false;  // forces uniform beta on every surrogate policy

  // Learned beta: a dataset file, or training in-process when empty.
  std::string model_path;
  int k = 60;
  int training_intervals = 2000;
  int virtual_intervals = 5;
  std::uint64_t training_seed = 1000003;

  SolverConfig solver;
  std::string output_dir;  // empty: no files
  int workers = 1;

  // Laptop scale: lambda 20, builtin solver with a node budget.
  static ExperimentConfig desk();
  // The published setting: lambda 100, external solver, 300 s per interval.
  static ExperimentConfig paper();

  bool needs_model() const;
  void validate() const;
};

// Applies one "key = value" assignment. Throws HarnessError on an unknown key
// or a malformed value.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Line-oriented "key = value" text; '#' starts a comment. A "profile" line is
// applied before all others, whatever its position.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = ExperimentConfig::desk());
ExperimentConfig load_config_file(const std::string& path,
                                  ExperimentConfig base = ExperimentConfig::desk());

// The resolved configuration in the same key = value syntax.
std::string manifest_text(const ExperimentConfig& config);

Network load_experiment_network(const ExperimentConfig& config);

struct InstanceRuns {
  int index = 0;  // 0-based position in the seed list
  std::uint64_t seed = 0;
  std::vector<PolicyRunReport> runs;  // in policy order
};

struct GapFigures {
  long profit_gap = 0;
  std::optional<double> profit_gap_pct;  // undefined when the baseline profit is 0
  int service_gap = 0;
  std::optional<double> service_gap_pct;  // relative to requests arrived
};

// Figures of `policy` against the myopic `baseline` on the same instance.
GapFigures compute_gap(const PolicyRunReport& baseline, const PolicyRunReport& policy);

struct ComparisonReport {
  std::vector<std::string> policies;
  std::vector<InstanceRuns> instances;

  // Index of the MYOPIC policy, if one was run.
  std::optional<std::size_t> baseline() const;
  // True when there is a baseline and at least one other policy.
  bool has_gaps() const;
  // Throws HarnessError when policies disagree on arrived counts.
  void validate() const;
};

// Runs every policy on one instance per seed. With a non-empty output_dir,
// writes summary.csv, gaps.csv, intervals.csv, heatmap.csv and manifest.txt
// there.
ComparisonReport run_experiment(const ExperimentConfig& config);
ComparisonReport run_experiment(const ExperimentConfig& config, const Network& network,
                                const KnnRegressor* model);

// instance,seed,policy,arrived,accepted,service_rate_pct,profit and, when the
// report has gaps, profit_gap,profit_gap_pct,service_gap,service_gap_pct
// (empty on baseline rows).
void write_summary_csv(std::ostream& out, const ComparisonReport& report);
// Per-policy means over instances: policy,instances,mean_profit,
// mean_profit_gap,mean_profit_gap_pct,mean_service_gap,mean_service_gap_pct.
void write_gaps_csv(std::ostream& out, const ComparisonReport& report);
// Per-interval series: instance,seed,policy,interval,alpha,arrived,accepted,
// profit,cumulative_profit,status.
void write_intervals_csv(std::ostream& out, const ComparisonReport& report);
// instance,seed,metric,<policy columns>: one "profit" row per instance and,
// when the report has gaps, one "gap_pct" row.
void emit_heatmap_data(std::ostream& out, const ComparisonReport& report);

void write_report_files(const std::string& dir, const ComparisonReport& report,
                        const std::string& manifest);

// Reads summary.csv (and intervals.csv when present) back; merging several
// run directories joins their policies instance by instance.
ComparisonReport read_report_dir(const std::string& dir);
ComparisonReport merge_reports(const std::vector<ComparisonReport>& reports);

// Percentages with one decimal and no negative zero.
std::string format_pct(double value);

}  // namespace ddsp
