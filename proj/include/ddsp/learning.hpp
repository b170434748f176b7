#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddsp/demand.hpp"
#include "ddsp/network.hpp"
#include "ddsp/route.hpp"

namespace ddsp {

class LearningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Drones on each link at an interval start, indexed by link id.
using OccupancySnapshot = std::vector<int>;
// Link traversal counts (raw) or predicted priorities, indexed by link id.
using PriorityVector = std::vector<double>;
// Row-major |N| x |N| adjacency matrix of link occupancy.
using FeatureVector = std::vector<double>;

// Credits the link the drone is on at interval_start: the traversal with
// depart <= interval_start < arrive. A drone standing on a node at that time
// is therefore counted on its next link; an arrived drone is not counted.
void link_activity(const Network& network, const SpaceTimeRoute& route, TimeStep interval_start,
                   OccupancySnapshot& snapshot);

// +1 for every link traversal of the route.
void beta_update(const Network& network, const SpaceTimeRoute& route, PriorityVector& beta);

FeatureVector encode_features(const OccupancySnapshot& snapshot, const Network& network);

// Divides by the maximum entry; an all-zero vector stays zero.
PriorityVector standardize_beta(PriorityVector beta);

struct TrainingDataset {
  std::vector<FeatureVector> features;
  std::vector<PriorityVector> targets;  // raw traversal counts
  int training_intervals = 0;
  int virtual_intervals = 0;
  std::uint64_t seed = 0;
  int k = 0;  // neighbor count chosen at training time; 0 if unset

  std::size_t rows() const { return features.size(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }
  std::size_t target_dim() const { return targets.empty() ? 0 : targets.front().size(); }
  void validate() const;
};

// Text format:
//   DATASET ROWS <n> FEATURES <f> TARGETS <t> TRAINING <I> VIRTUAL <v> SEED <s> K <k>
//   <f feature values> | <t target values>      (one line per row)
void save_dataset(std::ostream& out, const TrainingDataset& dataset);
TrainingDataset load_dataset(std::istream& in);
void save_dataset_file(const std::string& path, const TrainingDataset& dataset);
TrainingDataset load_dataset_file(const std::string& path);

struct TrainingConfig {
  DemandConfig demand;
  int training_intervals = 2000;
  int virtual_intervals = 5;
  TimeStep duration = 5;
  // Request windows are truncated at the end of the simulated day, as in a
  // test instance of this many intervals.
  int intervals_per_day = 12;
  std::uint64_t seed = 1;
  // Runs the standalone route checker on every interval's live route set and
  // checks the ledger is emptied; throws LearningError on failure. Slow.
  bool verify = false;

  void validate() const;
};

// Lookahead simulation over training_intervals intervals. Per interval:
// active routes are reserved and recorded in the snapshot; virtual requests
// of the next virtual_intervals intervals are routed with the reservation
// heuristic and counted into beta, then erased; idle requests keep their
// routes and the interval's real requests are routed; all reservations are
// then released. One dataset row per interval.
TrainingDataset synthesize_training_data(const Network& network, const TrainingConfig& config);

class KnnRegressor {
 public:
  KnnRegressor() = default;
  // Copies the dataset rows. Throws LearningError on an empty dataset or k
  // outside [1, rows].
  KnnRegressor(const TrainingDataset& dataset, int k, bool distance_weighted = false);

  int k() const { return k_; }
  bool distance_weighted() const { return weighted_; }
  std::size_t rows() const { return data_.rows(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t target_dim() const { return target_dim_; }

  // Indices of the k nearest rows by Euclidean distance, nearest first;
  // equal distances are ordered by row index.
  std::vector<std::size_t> neighbors(std::span<const double> feature) const;
  // Componentwise mean of the neighbors' targets (or inverse-distance
  // weighted mean when enabled).
  PriorityVector predict(std::span<const double> feature) const;

  const TrainingDataset& dataset() const { return data_; }

 private:
  TrainingDataset data_;
  int k_ = 0;
  bool weighted_ = false;
  std::size_t feature_dim_ = 0;
  std::size_t target_dim_ = 0;
};

KnnRegressor knn_fit(const TrainingDataset& dataset, int k, bool distance_weighted = false);
PriorityVector knn_predict(const KnnRegressor& model, std::span<const double> feature);

}  // namespace ddsp
