#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "ddsp/network.hpp"

namespace ddsp {

using RequestId = int;

// 64-bit Mersenne Twister (std::mt19937_64); its output sequence is fixed by
// the C++ standard. Distributions come from the standard library, so draws are
// reproducible per toolchain.
using Rng = std::mt19937_64;

// Derives an independent stream seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct Request {
  RequestId id = 0;
  NodeId origin = 0;
  NodeId destination = 0;
  TimeStep submitted = 0;
  TimeStep earliest = 0;
  TimeStep window_lo = 0;
  TimeStep window_hi = 0;
  int profit = 0;

  friend bool operator==(const Request&, const Request&) = default;
};

struct DemandConfig {
  double rate = 20.0;              // requests per interval (Poisson)
  double origin_decay = 2.0;       // origins ~ exp(-a * y_norm)
  double destination_decay = 2.0;  // destinations ~ exp(-a * (1 - y_norm))
  int departure_offset_min = 0;    // e_r - t_r ~ U{min..max}
  int departure_offset_max = 10;
  double window_shape = 4.0;       // skew-normal shape; scale = span / 4
  int profit_min = 1;              // p_r ~ U{min..max}
  int profit_max = 10;

  double mean_profit() const { return 0.5 * (profit_min + profit_max); }
  void validate() const;
};

// Time frame a request is sampled in: submission in [start, start + duration),
// arrival windows truncated at horizon_end.
struct IntervalFrame {
  TimeStep start = 0;
  TimeStep duration = 1;
  TimeStep horizon_end = 1;
};

int sample_interval_count(const DemandConfig& config, Rng& rng);

// Origin/destination weights, exposed for tests.
std::vector<double> origin_weights(const DemandConfig& config, const Network& network);
std::vector<double> destination_weights(const DemandConfig& config, const Network& network);

Request sample_request(const DemandConfig& config, const Network& network,
                       const IntervalFrame& frame, RequestId id, Rng& rng);

// Samples all requests of one interval, sorted by submission time, with ids
// starting at first_id.
std::vector<Request> sample_interval(const DemandConfig& config, const Network& network,
                                     const IntervalFrame& frame, RequestId first_id, Rng& rng);

struct Instance {
  int intervals = 0;
  TimeStep duration = 0;
  std::uint64_t seed = 0;
  // by_interval[i - 1] holds the requests submitted in interval i.
  std::vector<std::vector<Request>> by_interval;

  TimeStep horizon() const { return intervals * duration; }
  std::size_t total_requests() const;
  const std::vector<Request>& interval(int i) const { return by_interval.at(i - 1); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

Instance generate_instance(const DemandConfig& config, const Network& network, int intervals,
                           TimeStep duration, std::uint64_t seed);

// Text format:
//   INSTANCE INTERVALS <I> DURATION <D> SEED <seed>
//   I <idx>
//   R <id> <o> <d> <t> <e> <l> <u> <p>
void save_instance(std::ostream& out, const Instance& instance);
Instance load_instance(std::istream& in);
void save_instance_file(const std::string& path, const Instance& instance);
Instance load_instance_file(const std::string& path);

}  // namespace ddsp
