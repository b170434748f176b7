#include "ddsp/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ddsp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void DemandConfig::validate() const {
  if (!(rate >= 0.0)) throw ModelError("demand rate must be >= 0");
  if (profit_min > profit_max) throw ModelError("profit range is empty");
  if (departure_offset_min < 0 || departure_offset_min > departure_offset_max) {
    throw ModelError("invalid earliest-departure offset range");
  }
  if (!(window_shape >= 0.0)) throw ModelError("window shape must be >= 0");
}

int sample_interval_count(const DemandConfig& config, Rng& rng) {
  if (config.rate <= 0.0) return 0;
  std::poisson_distribution<int> poisson(config.rate);
  return poisson(rng);
}

namespace {

std::vector<double> normalized_y(const Network& network) {
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const Node& n : network.nodes()) {
    if (first) {
      lo = hi = n.y;
      first = false;
    }
    lo = std::min(lo, n.y);
    hi = std::max(hi, n.y);
  }
  std::vector<double> out;
  for (const Node& n : network.nodes()) {
    out.push_back(hi > lo ? (n.y - lo) / (hi - lo) : 0.0);
  }
  return out;
}

// Skew-normal draw via the Azzalini representation.
double skew_normal(double location, double scale, double shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double delta = shape / std::sqrt(1.0 + shape * shape);
  const double u0 = normal(rng);
  const double v = normal(rng);
  const double u1 = delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * v;
  return location + scale * u1;
}

TimeStep truncated_window_draw(double lo, double hi, double shape, Rng& rng) {
  const double scale = (hi - lo) / 4.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = skew_normal(lo, scale, shape, rng);
    if (x >= lo && x <= hi) return static_cast<TimeStep>(std::lround(x));
  }
  return static_cast<TimeStep>(std::lround(lo));
}

}  // namespace

std::vector<double> origin_weights(const DemandConfig& config, const Network& network) {
  std::vector<double> w;
  for (double y : normalized_y(network)) w.push_back(std::exp(-config.origin_decay * y));
  return w;
}

std::vector<double> destination_weights(const DemandConfig& config, const Network& network) {
  std::vector<double> w;
  for (double y : normalized_y(network)) {
    w.push_back(std::exp(-config.destination_decay * (1.0 - y)));
  }
  return w;
}

Request sample_request(const DemandConfig& config, const Network& network,
                       const IntervalFrame& frame, RequestId id, Rng& rng) {
  if (network.node_count() < 2) throw ModelError("demand needs at least two nodes");
  const auto ow = origin_weights(config, network);
  const auto dw = destination_weights(config, network);
  std::discrete_distribution<NodeId> pick_origin(ow.begin(), ow.end());
  std::discrete_distribution<NodeId> pick_destination(dw.begin(), dw.end());

  Request r;
  r.id = id;
  TimeStep free_flow = 0;
  bool found = false;
  for (int attempt = 0; attempt < 10000 && !found; ++attempt) {
    r.origin = pick_origin(rng);
    r.destination = pick_destination(rng);
    if (r.origin == r.destination) continue;
    if (auto t = network.free_flow_time(r.origin, r.destination)) {
      free_flow = *t;
      found = true;
    }
  }
  if (!found) throw ModelError("no feasible origin/destination pair");

  std::uniform_int_distribution<TimeStep> submit(frame.start, frame.start + frame.duration - 1);
  r.submitted = submit(rng);
  std::uniform_int_distribution<TimeStep> offset(config.departure_offset_min,
                                                 config.departure_offset_max);
  r.earliest = r.submitted + offset(rng);

  // Window drawn between the free-flow arrival and the horizon end; late
  // requests whose free-flow arrival already passes the horizon get a
  // window collapsed onto that arrival.
  const double lo = r.earliest + free_flow;
  const double hi = std::max<double>(lo, frame.horizon_end);
  if (hi > lo) {
    const TimeStep a = truncated_window_draw(lo, hi, config.window_shape, rng);
    const TimeStep b = truncated_window_draw(lo, hi, config.window_shape, rng);
    r.window_lo = std::min(a, b);
    r.window_hi = std::max(a, b);
  } else {
    r.window_lo = r.window_hi = static_cast<TimeStep>(lo);
  }

  std::uniform_int_distribution<int> profit(config.profit_min, config.profit_max);
  r.profit = profit(rng);
  return r;
}

std::vector<Request> sample_interval(const DemandConfig& config, const Network& network,
                                     const IntervalFrame& frame, RequestId first_id, Rng& rng) {
  const int count = sample_interval_count(config, rng);
  std::vector<Request> requests;
  requests.reserve(count);
  for (int k = 0; k < count; ++k) {
    requests.push_back(sample_request(config, network, frame, 0, rng));
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) { return a.submitted < b.submitted; });
  for (auto& r : requests) r.id = first_id++;
  return requests;
}

std::size_t Instance::total_requests() const {
  std::size_t total = 0;
  for (const auto& v : by_interval) total += v.size();
  return total;
}

Instance generate_instance(const DemandConfig& config, const Network& network, int intervals,
                           TimeStep duration, std::uint64_t seed) {
  config.validate();
  if (intervals < 1 || duration < 1) throw ModelError("instance needs I >= 1 and D >= 1");
  Instance inst;
  inst.intervals = intervals;
  inst.duration = duration;
  inst.seed = seed;
  Rng rng(seed);
  RequestId next_id = 0;
  for (int i = 1; i <= intervals; ++i) {
    IntervalFrame frame{(i - 1) * duration, duration, intervals * duration};
    auto reqs = sample_interval(config, network, frame, next_id, rng);
    next_id += static_cast<RequestId>(reqs.size());
    inst.by_interval.push_back(std::move(reqs));
  }
  return inst;
}

void save_instance(std::ostream& out, const Instance& instance) {
  out << "INSTANCE INTERVALS " << instance.intervals << " DURATION " << instance.duration
      << " SEED " << instance.seed << '\n';
  for (int i = 1; i <= instance.intervals; ++i) {
    out << "I " << i << '\n';
    for (const Request& r : instance.interval(i)) {
      out << "R " << r.id << ' ' << r.origin << ' ' << r.destination << ' ' << r.submitted << ' '
          << r.earliest << ' ' << r.window_lo << ' ' << r.window_hi << ' ' << r.profit << '\n';
    }
  }
}

Instance load_instance(std::istream& in) {
  Instance inst;
  std::string line;
  int line_no = 0;
  int current = 0;
  bool header = false;
  auto fail = [&](const std::string& what) {
    throw ModelError("instance line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::istringstream ss(hash == std::string::npos ? line : line.substr(0, hash));
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "INSTANCE") {
      std::string k1, k2, k3;
      if (!(ss >> k1 >> inst.intervals >> k2 >> inst.duration >> k3 >> inst.seed) ||
          k1 != "INTERVALS" || k2 != "DURATION" || k3 != "SEED") {
        fail("bad INSTANCE header");
      }
      if (inst.intervals < 1 || inst.duration < 1) fail("INTERVALS and DURATION must be >= 1");
      inst.by_interval.assign(inst.intervals, {});
      header = true;
    } else if (tag == "I") {
      if (!header) fail("interval before header");
      if (!(ss >> current) || current < 1 || current > inst.intervals) {
        fail("bad interval index");
      }
    } else if (tag == "R") {
      if (current == 0) fail("request outside an interval block");
      Request r;
      if (!(ss >> r.id >> r.origin >> r.destination >> r.submitted >> r.earliest >> r.window_lo >>
            r.window_hi >> r.profit)) {
        fail("expected 'R <id> <o> <d> <t> <e> <l> <u> <p>'");
      }
      if (r.origin == r.destination) fail("origin equals destination");
      if (r.window_lo > r.window_hi || r.earliest < r.submitted) fail("inconsistent request times");
      const TimeStep start = (current - 1) * inst.duration;
      if (r.submitted < start || r.submitted >= start + inst.duration) {
        fail("submission time outside its interval");
      }
      inst.by_interval[current - 1].push_back(r);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!header) throw ModelError("instance file has no INSTANCE header");
  return inst;
}

void save_instance_file(const std::string& path, const Instance& instance) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write instance file " + path);
  save_instance(out, instance);
}

Instance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open instance file " + path);
  return load_instance(in);
}

}  // namespace ddsp
