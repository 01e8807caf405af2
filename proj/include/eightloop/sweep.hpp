#pragma once

// Random-arc cyclicity sweeps near the eight-loop. Every sample is a pure
// function of (seed, family, index), so results do not depend on the number
// of worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "eightloop/dynamics.hpp"
#include "eightloop/error.hpp"

namespace eightloop {

/// splitmix64 on (seed, stream, counter); stateless apart from the counter.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class ArcFamily {
  M1Nonzero,  ///< (l11, l41) != 0
  M1Zero,     ///< l11 = l41 = 0, second-order terms free
  Zero,       ///< lambda identically zero
};

constexpr std::string_view to_string(ArcFamily f) noexcept {
  switch (f) {
    case ArcFamily::M1Nonzero: return "m1-nonzero";
    case ArcFamily::M1Zero: return "m1-zero";
    case ArcFamily::Zero: return "zero";
  }
  return "?";
}

inline ArcFamily parse_arc_family(std::string_view s) {
  for (ArcFamily f : {ArcFamily::M1Nonzero, ArcFamily::M1Zero, ArcFamily::Zero}) {
    if (s == to_string(f)) return f;
  }
  throw Error(ErrorCode::ConfigError, "unknown arc family '" + std::string(s) + "'");
}

/// Bound asserted by the sweep: 2 cycles when M1 does not vanish, 5 otherwise.
constexpr int cyclicity_bound(ArcFamily f) noexcept { return f == ArcFamily::M1Nonzero ? 2 : 5; }

/// Draws one arc of the family. Half of the nonzero draws are placed within
/// 1% of the hypersurface where the leading constant c0 of the first
/// non-vanishing M_k is zero, where the loop can shed the most cycles.
inline ArcSpec sample_arc(ArcFamily family, std::uint64_t seed, std::uint64_t index) {
  CounterRng rng(seed, index * 4 + static_cast<std::uint64_t>(family));
  ArcSpec arc;
  if (family == ArcFamily::Zero) return arc;
  const bool near_degenerate = index % 2 == 1;
  std::array<double, 4> o1{}, o2{};
  for (int p = 0; p < 4; ++p) {
    o1[p] = rng.uniform(-1.0, 1.0);
    o2[p] = rng.uniform(-1.0, 1.0);
  }
  // c0 = (4/3) l1 + (16/15) l4 + (16/3) cross.
  if (family == ArcFamily::M1Nonzero) {
    if (near_degenerate) o1[3] = -1.25 * o1[0] * (1.0 + rng.uniform(-0.01, 0.01));
  } else {
    o1[0] = 0.0;
    o1[3] = 0.0;
    if (near_degenerate) {
      const double cross = o1[1] * o1[2] / 3.0;
      o2[3] = -(1.25 * o2[0] + 5.0 * cross) * (1.0 + rng.uniform(-0.01, 0.01));
    }
  }
  for (int p = 0; p < 4; ++p) arc.coeff_table[static_cast<std::size_t>(p)] = {o1[p], o2[p]};
  return arc;
}

struct SweepOptions {
  int grid_n = 48;
  int threads = 1;
  std::uint64_t seed = 0;
  LimitCycleOptions cycle{};
  /// Tolerance tightening applied when re-examining an anomalous sample.
  double recheck_factor = 100.0;
};

struct SweepSample {
  std::uint64_t index = 0;
  ArcSpec arc;
  int count = 0;
  std::vector<LimitCycleRecord> cycles;
  std::vector<SampleFailure> failures;
  bool anomaly = false;
  /// Anomaly still present after the tightened re-run.
  bool confirmed = false;
};

struct SweepReport {
  ArcFamily family = ArcFamily::Zero;
  double eps = 0.0;
  std::pair<double, double> window{0.0, 0.0};
  int bound = 0;
  std::vector<SweepSample> samples;
  std::map<int, int> histogram;
  int max_count = 0;
  int anomalies = 0;
  int confirmed_anomalies = 0;
  int failed_samples = 0;
};

inline SweepReport cyclicity_sweep(ArcFamily family, double eps, std::pair<double, double> h_window, int n_samples,
                                   const IntegratorConfig& cfg = {}, const SweepOptions& opt = {}) {
  if (!(eps > 0.0)) throw Error(ErrorCode::OutOfRange, "eps must be positive");
  if (n_samples < 0) throw Error(ErrorCode::OutOfRange, "n_samples must be non-negative");
  SweepReport rep;
  rep.family = family;
  rep.eps = eps;
  rep.window = h_window;
  rep.bound = cyclicity_bound(family);
  rep.samples.resize(static_cast<std::size_t>(n_samples));

  LimitCycleOptions copt = opt.cycle;
  copt.epsilon = eps;
  auto run_one = [&](std::size_t i) {
    SweepSample& s = rep.samples[i];
    s.index = i;
    s.arc = sample_arc(family, opt.seed, i);
    const PerturbationParams lam = s.arc.at(eps);
    try {
      LimitCycleScan scan = find_limit_cycles(lam, h_window, opt.grid_n, cfg, copt);
      s.count = static_cast<int>(scan.records.size());
      s.cycles = std::move(scan.records);
      s.failures = std::move(scan.failures);
      s.anomaly = s.count > rep.bound;
      if (s.anomaly) {
        const LimitCycleScan again =
            find_limit_cycles(lam, h_window, 2 * opt.grid_n, cfg.tightened(opt.recheck_factor), copt);
        s.confirmed = static_cast<int>(again.records.size()) > rep.bound;
      }
    } catch (const Error& e) {
      // Worker threads must not throw; the sample is reported as failed.
      s.failures.push_back({std::numeric_limits<double>::quiet_NaN(), e.code(), e.what()});
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rep.samples.size(); i = next++) run_one(i);
  };
  const int n_threads = std::max(1, std::min(opt.threads, n_samples));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (const SweepSample& s : rep.samples) {
    ++rep.histogram[s.count];
    rep.max_count = std::max(rep.max_count, s.count);
    rep.anomalies += s.anomaly;
    rep.confirmed_anomalies += s.confirmed;
    rep.failed_samples += !s.failures.empty();
  }
  return rep;
}

}  // namespace eightloop
