#include "ddsp/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ddsp/reservation.hpp"

namespace ddsp {

void link_activity(const Network& network, const SpaceTimeRoute& route, TimeStep interval_start,
                   OccupancySnapshot& snapshot) {
  for (const RouteTraversal& step : route_traversals(network, route)) {
    if (step.depart <= interval_start && interval_start < step.arrive) {
      ++snapshot.at(step.link);
      return;
    }
  }
}

void beta_update(const Network& network, const SpaceTimeRoute& route, PriorityVector& beta) {
  for (LinkId l : route_links(network, route)) beta.at(l) += 1.0;
}

FeatureVector encode_features(const OccupancySnapshot& snapshot, const Network& network) {
  if (snapshot.size() != network.link_count()) {
    throw LearningError("snapshot has " + std::to_string(snapshot.size()) + " entries, network " +
                        std::to_string(network.link_count()) + " links");
  }
  const std::size_t n = network.node_count();
  FeatureVector out(n * n, 0.0);
  for (const Link& l : network.links()) {
    // Parallel links share one matrix cell.
    out[static_cast<std::size_t>(l.tail) * n + l.head] += snapshot[l.id];
  }
  return out;
}

PriorityVector standardize_beta(PriorityVector beta) {
  const double top = beta.empty() ? 0.0 : *std::max_element(beta.begin(), beta.end());
  for (double& b : beta) b = top > 0.0 ? b / top : 0.0;
  return beta;
}

void TrainingDataset::validate() const {
  if (features.size() != targets.size()) throw LearningError("feature and target row counts differ");
  for (std::size_t r = 0; r < rows(); ++r) {
    if (features[r].size() != feature_dim() || targets[r].size() != target_dim()) {
      throw LearningError("dataset row " + std::to_string(r) + " has inconsistent dimensions");
    }
  }
}

void save_dataset(std::ostream& out, const TrainingDataset& dataset) {
  dataset.validate();
  out << "DATASET ROWS " << dataset.rows() << " FEATURES " << dataset.feature_dim() << " TARGETS "
      << dataset.target_dim() << " TRAINING " << dataset.training_intervals << " VIRTUAL "
      << dataset.virtual_intervals << " SEED " << dataset.seed << " K " << dataset.k << '\n';
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    for (double v : dataset.features[r]) {
      put(v);
      out << ' ';
    }
    out << '|';
    for (double v : dataset.targets[r]) {
      out << ' ';
      put(v);
    }
    out << '\n';
  }
}

TrainingDataset load_dataset(std::istream& in) {
  TrainingDataset d;
  std::string line;
  if (!std::getline(in, line)) throw LearningError("empty dataset file");
  std::istringstream head(line);
  std::string word;
  std::size_t rows = 0, fdim = 0, tdim = 0;
  head >> word;
  if (word != "DATASET") throw LearningError("dataset file must start with DATASET");
  while (head >> word) {
    if (word == "ROWS") head >> rows;
    else if (word == "FEATURES") head >> fdim;
    else if (word == "TARGETS") head >> tdim;
    else if (word == "TRAINING") head >> d.training_intervals;
    else if (word == "VIRTUAL") head >> d.virtual_intervals;
    else if (word == "SEED") head >> d.seed;
    else if (word == "K") head >> d.k;
    else throw LearningError("unknown dataset header field " + word);
    if (!head) throw LearningError("malformed dataset header");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw LearningError("dataset ends after " + std::to_string(r) + " rows");
    const auto bar = line.find('|');
    if (bar == std::string::npos) throw LearningError("dataset row " + std::to_string(r) + " lacks '|'");
    const auto parse = [&](const std::string& part, std::size_t dim) {
      std::istringstream s(part);
      std::vector<double> v;
      double x = 0;
      while (s >> x) v.push_back(x);
      if (!s.eof() || v.size() != dim) {
        throw LearningError("dataset row " + std::to_string(r) + " has a malformed vector");
      }
      return v;
    };
    d.features.push_back(parse(line.substr(0, bar), fdim));
    d.targets.push_back(parse(line.substr(bar + 1), tdim));
  }
  d.validate();
  return d;
}

void save_dataset_file(const std::string& path, const TrainingDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw LearningError("cannot write " + path);
  save_dataset(out, dataset);
  if (!out) throw LearningError("write failed for " + path);
}

TrainingDataset load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LearningError("cannot open " + path);
  return load_dataset(in);
}

void TrainingConfig::validate() const {
  demand.validate();
  if (training_intervals < 1) throw LearningError("training needs at least one interval");
  if (virtual_intervals < 1) throw LearningError("lookahead needs at least one virtual interval");
  if (duration < 1) throw LearningError("interval duration must be positive");
  if (intervals_per_day < 1) throw LearningError("intervals per day must be positive");
}

namespace {

struct Accepted {
  Request request;
  SpaceTimeRoute route;
};

}  // namespace

TrainingDataset synthesize_training_data(const Network& network, const TrainingConfig& config) {
  config.validate();
  const TimeStep D = config.duration;
  const TimeStep day = static_cast<TimeStep>(config.intervals_per_day) * D;
  const auto day_end = [&](int interval) {
    return ((static_cast<TimeStep>(interval) - 1) * D / day + 1) * day;
  };
  const int last = config.training_intervals + config.virtual_intervals;
  TimeStep max_free_flow = 0;
  for (TimeStep t : network.free_flow_matrix()) max_free_flow = std::max(max_free_flow, t);
  const TimeStep horizon = day_end(last) + config.demand.departure_offset_max + max_free_flow + 1;
  const TimeExpandedGraph graph(network, horizon);

  ReservationLedger ledger(network);
  Rng real_rng(derive_seed(config.seed, 0));
  Rng virtual_rng(derive_seed(config.seed, 1));
  constexpr RequestId kVirtualBase = 1 << 29;
  RequestId next_id = 0;
  std::map<RequestId, Accepted> accepted;
  std::map<RequestId, Request> virtual_requests;
  const auto verify_live = [&](int interval, const char* stage) {
    std::vector<PlannedRoute> live;
    for (const auto& [id, route] : ledger.live_routes()) {
      auto a = accepted.find(id);
      live.push_back({a != accepted.end() ? a->second.request : virtual_requests.at(id), route});
    }
    const auto bad = check_routes(network, live);
    if (!bad.empty()) {
      throw LearningError("interval " + std::to_string(interval) + " (" + stage +
                          "): infeasible route set: " + bad.front().detail);
    }
    ledger.check_invariants();
  };

  TrainingDataset out;
  out.training_intervals = config.training_intervals;
  out.virtual_intervals = config.virtual_intervals;
  out.seed = config.seed;

  for (int i = 1; i <= config.training_intervals; ++i) {
    const TimeStep t0 = static_cast<TimeStep>(i - 1) * D;
    OccupancySnapshot snapshot(network.link_count(), 0);
    PriorityVector beta(network.link_count(), 0.0);

    std::vector<RequestId> idle;
    for (auto& [id, a] : accepted) {
      if (a.route.departure() <= t0) {
        reserve(a.route, ledger);
        link_activity(network, a.route, t0, snapshot);
      } else {
        a.request.earliest = std::max(a.request.earliest, t0);
        idle.push_back(id);
      }
    }

    // Lookahead: fresh draws for the coming intervals, routed on top of the
    // active reservations, counted, then erased.
    std::vector<SpaceTimeRoute> virtual_routes;
    RequestId virtual_id = kVirtualBase;
    for (int v = 0; v < config.virtual_intervals; ++v) {
      const int j = i + v;
      const IntervalFrame frame{static_cast<TimeStep>(j - 1) * D, D, day_end(j)};
      for (const Request& r : sample_interval(config.demand, network, frame, virtual_id, virtual_rng)) {
        virtual_id = std::max(virtual_id, r.id + 1);
        if (config.verify) virtual_requests[r.id] = r;
        if (auto route = new_reservation(r, ledger, graph)) {
          beta_update(network, *route, beta);
          virtual_routes.push_back(std::move(*route));
        }
      }
    }
    if (config.verify) verify_live(i, "lookahead");
    for (const SpaceTimeRoute& route : virtual_routes) empty_reservation(route, ledger);
    virtual_requests.clear();

    // Real requests: idle ones keep their committed routes, new ones are
    // routed by the reservation heuristic.
    for (RequestId id : idle) reserve(accepted.at(id).route, ledger);
    const IntervalFrame frame{t0, D, day_end(i)};
    for (const Request& r : sample_interval(config.demand, network, frame, next_id, real_rng)) {
      next_id = std::max(next_id, r.id + 1);
      if (auto route = new_reservation(r, ledger, graph)) accepted.emplace(r.id, Accepted{r, *route});
    }

    if (config.verify) verify_live(i, "real requests");
    out.features.push_back(encode_features(snapshot, network));
    out.targets.push_back(std::move(beta));

    for (const auto& [id, route] : std::map<RequestId, SpaceTimeRoute>(ledger.live_routes())) {
      empty_reservation(route, ledger);
    }
    if (config.verify && !ledger.is_empty()) throw LearningError("ledger not emptied");
    const TimeStep t1 = static_cast<TimeStep>(i) * D;
    std::erase_if(accepted, [&](const auto& kv) { return kv.second.route.arrival() <= t1; });
  }
  return out;
}

KnnRegressor::KnnRegressor(const TrainingDataset& dataset, int k, bool distance_weighted)
    : data_(dataset), k_(k), weighted_(distance_weighted) {
  data_.validate();
  if (data_.rows() == 0) throw LearningError("cannot fit kNN on an empty dataset");
  if (k < 1 || static_cast<std::size_t>(k) > data_.rows()) {
    throw LearningError("k = " + std::to_string(k) + " outside [1, " + std::to_string(data_.rows()) + "]");
  }
  feature_dim_ = data_.feature_dim();
  target_dim_ = data_.target_dim();
}

std::vector<std::size_t> KnnRegressor::neighbors(std::span<const double> feature) const {
  if (k_ == 0) throw LearningError("kNN model is not fitted");
  if (feature.size() != feature_dim_) {
    throw LearningError("query has " + std::to_string(feature.size()) + " features, model " +
                        std::to_string(feature_dim_));
  }
  std::vector<std::pair<double, std::size_t>> dist(data_.rows());
  for (std::size_t r = 0; r < data_.rows(); ++r) {
    const FeatureVector& row = data_.features[r];
    double s = 0.0;
    for (std::size_t f = 0; f < feature_dim_; ++f) {
      const double d = row[f] - feature[f];
      s += d * d;
    }
    dist[r] = {s, r};
  }
  const auto kth = dist.begin() + k_;
  std::partial_sort(dist.begin(), kth, dist.end());
  std::vector<std::size_t> out;
  out.reserve(k_);
  for (auto it = dist.begin(); it != kth; ++it) out.push_back(it->second);
  return out;
}

PriorityVector KnnRegressor::predict(std::span<const double> feature) const {
  const std::vector<std::size_t> nn = neighbors(feature);
  PriorityVector out(target_dim_, 0.0);
  std::vector<double> weight(nn.size(), 1.0);
  if (weighted_) {
    std::vector<double> d(nn.size());
    bool exact = false;
    for (std::size_t j = 0; j < nn.size(); ++j) {
      double s = 0.0;
      for (std::size_t f = 0; f < feature_dim_; ++f) {
        const double x = data_.features[nn[j]][f] - feature[f];
        s += x * x;
      }
      d[j] = std::sqrt(s);
      exact = exact || d[j] == 0.0;
    }
    // Exact matches take all the weight.
    for (std::size_t j = 0; j < nn.size(); ++j) weight[j] = exact ? (d[j] == 0.0) : 1.0 / d[j];
  }
  double total = 0.0;
  for (std::size_t j = 0; j < nn.size(); ++j) {
    if (weight[j] == 0.0) continue;
    total += weight[j];
    const PriorityVector& t = data_.targets[nn[j]];
    for (std::size_t c = 0; c < target_dim_; ++c) out[c] += weight[j] * t[c];
  }
  for (double& v : out) v /= total;
  return out;
}

KnnRegressor knn_fit(const TrainingDataset& dataset, int k, bool distance_weighted) {
  return KnnRegressor(dataset, k, distance_weighted);
}

PriorityVector knn_predict(const KnnRegressor& model, std::span<const double> feature) {
  return model.predict(feature);
}

}  // namespace ddsp
