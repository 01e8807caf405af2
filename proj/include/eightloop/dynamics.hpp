#pragma once

// Direct simulation of the perturbed flow: trajectories with dense output,
// the first-return map on the section {y = 0, x > 0} parameterised by the
// energy h, and displacement-map limit-cycle detection.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eightloop/dopri5.hpp"
#include "eightloop/error.hpp"
#include "eightloop/hamiltonian.hpp"
#include "eightloop/melnikov.hpp"

namespace eightloop {

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_time = 200.0;
  long max_steps = 2'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !(max_time > 0.0) || max_steps < 1) {
      throw Error(ErrorCode::OutOfRange, "integrator tolerances and caps must be positive");
    }
  }
  IntegratorConfig tightened(double factor) const {
    return {rel_tol / factor, abs_tol / factor, max_time, max_steps};
  }
  StepControl step_control() const {
    StepControl c;
    c.rel_tol = rel_tol;
    c.abs_tol = abs_tol;
    c.max_steps = max_steps;
    return c;
  }
};

namespace detail {
inline auto planar_rhs(const PerturbationParams& lam) {
  return [lam](double, const State<2>& u) {
    const auto v = vector_field({u[0], u[1]}, lam);
    return State<2>{v[0], v[1]};
  };
}
using PlanarRhs = decltype(planar_rhs(PerturbationParams{}));
}  // namespace detail

/// Piecewise dense output of one integration, queryable anywhere in [0, t_end].
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(PhasePoint start) : start_(start) {}

  void append(const DenseStep<2>& s) { steps_.push_back(s); }

  double t_end() const { return steps_.empty() ? 0.0 : steps_.back().t1(); }
  std::size_t size() const { return steps_.size(); }
  const std::vector<DenseStep<2>>& steps() const { return steps_; }

  PhasePoint at(double t) const {
    if (steps_.empty() || t <= 0.0) return start_;
    if (t > t_end()) throw Error(ErrorCode::OutOfRange, "time beyond the integrated span");
    auto it = std::lower_bound(steps_.begin(), steps_.end(), t,
                               [](const DenseStep<2>& s, double tt) { return s.t1() < tt; });
    if (it == steps_.end()) it = std::prev(steps_.end());
    const State<2> u = (*it)(t);
    return {u[0], u[1]};
  }

 private:
  PhasePoint start_{};
  std::vector<DenseStep<2>> steps_;
};

inline Trajectory integrate(PhasePoint p0, const PerturbationParams& lam, double t_end,
                            const IntegratorConfig& cfg = {}) {
  cfg.validate();
  if (!std::isfinite(p0.x) || !std::isfinite(p0.y)) throw Error(ErrorCode::OutOfRange, "non-finite start point");
  if (t_end > cfg.max_time) throw Error(ErrorCode::TimeCap, "requested span exceeds max_time");
  Trajectory traj(p0);
  DormandPrince5<2, detail::PlanarRhs> stepper(detail::planar_rhs(lam), {p0.x, p0.y}, 0.0, cfg.step_control());
  while (stepper.time() < t_end) {
    stepper.step(t_end);
    traj.append(stepper.last_step());
  }
  return traj;
}

struct ReturnMapSample {
  double h_in = 0.0;
  double h_out = 0.0;
  double flow_time = 0.0;
  int crossings = 0;  // discarded crossings of y = 0 (wrong direction or x < 0)
  PhasePoint landing{};
};

/// Energies below this are too close to the loop for bounded return times.
inline constexpr double kReturnMapFloor = 1e-3;
inline constexpr double kEscapeRadius = 10.0;

/// Launch from (x_plus(h_in), 0) and flow to the next downward crossing of
/// y = 0 with x > 0. The crossing time is located on the dense output to
/// 1e-12 and the state there is recomputed with an exact-length step.
inline ReturnMapSample return_map(double h_in, const PerturbationParams& lam, const IntegratorConfig& cfg = {}) {
  cfg.validate();
  const OvalGeometry geo = oval_geometry(h_in);
  if (h_in < kReturnMapFloor) throw Error(ErrorCode::OutOfRange, "return map needs h_in >= 1e-3");
  DormandPrince5<2, detail::PlanarRhs> stepper(detail::planar_rhs(lam), {geo.x_plus, 0.0}, 0.0,
                                               cfg.step_control());
  ReturnMapSample out;
  out.h_in = h_in;
  while (stepper.time() < cfg.max_time) {
    // The launch point has y = 0 exactly, so it never counts as a crossing.
    const State<2> before = stepper.state();
    stepper.step(cfg.max_time);
    const State<2>& after = stepper.state();
    if (std::abs(after[0]) >= kEscapeRadius || std::abs(after[1]) >= kEscapeRadius) {
      throw Error(ErrorCode::EscapedRegion, "trajectory left |x|, |y| < 10");
    }
    const bool down = before[1] > 0.0 && after[1] <= 0.0;
    const bool up = before[1] < 0.0 && after[1] >= 0.0;
    if (!down && !up) continue;
    if (up || after[0] <= 0.0) {
      ++out.crossings;
      continue;
    }
    const DenseStep<2>& ds = stepper.last_step();
    double lo = ds.t0;
    double hi = ds.t1();
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ds(mid)[1] > 0.0 ? lo : hi) = mid;
    }
    const double t_star = 0.5 * (lo + hi);
    const State<2> u = t_star - ds.t0 > 0.0 ? stepper.probe_from_last(t_star - ds.t0) : ds(t_star);
    out.flow_time = t_star;
    out.landing = {u[0], u[1]};
    out.h_out = energy(out.landing);
    return out;
  }
  throw Error(ErrorCode::TimeCap, "no return to the section before max_time");
}

inline double displacement(double h_in, const PerturbationParams& lam, const IntegratorConfig& cfg = {}) {
  const ReturnMapSample s = return_map(h_in, lam, cfg);
  return s.h_out - s.h_in;
}

// ---------------------------------------------------------------------------
// Limit cycles

struct LimitCycleRecord {
  double h_star = 0.0;
  std::pair<double, double> bracket{0.0, 0.0};
  /// Secant estimate of P'(h) - 1 over the grid cell; negative means attracting.
  double slope = 0.0;
  int stability = 0;  // sign of slope
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

struct SampleFailure {
  double h = 0.0;
  ErrorCode code = ErrorCode::NumericalFailure;
  std::string message;
};

struct LimitCycleScan {
  std::vector<LimitCycleRecord> records;
  std::vector<SampleFailure> failures;
};

struct LimitCycleOptions {
  GridSpacing spacing = GridSpacing::Logarithmic;
  double refine_tol = 1e-9;
  /// Displacements this small are treated as sign-less (integration noise).
  double noise_floor = 1e-11;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

inline LimitCycleScan find_limit_cycles(const PerturbationParams& lam, std::pair<double, double> h_range, int grid_n,
                                        const IntegratorConfig& cfg = {}, const LimitCycleOptions& opt = {}) {
  if (!(h_range.first >= kReturnMapFloor) || !(h_range.second > h_range.first)) {
    throw Error(ErrorCode::OutOfRange, "limit-cycle search needs h_floor <= h_lo < h_hi");
  }
  if (grid_n < 2) throw Error(ErrorCode::OutOfRange, "grid_n must be >= 2");
  LimitCycleScan scan;
  auto sample = [&](double h) -> std::optional<double> {
    try {
      return displacement(h, lam, cfg);
    } catch (const Error& e) {
      scan.failures.push_back({h, e.code(), e.what()});
      return std::nullopt;
    }
  };
  auto sign_of = [&](double d) { return std::abs(d) <= opt.noise_floor ? 0 : (d > 0.0 ? 1 : -1); };

  const std::vector<double> grid = make_grid(h_range, grid_n, opt.spacing);
  std::optional<std::pair<double, double>> prev;  // last point with a definite sign
  for (double h : grid) {
    const auto d = sample(h);
    if (!d || sign_of(*d) == 0) continue;
    if (prev && sign_of(prev->second) != sign_of(*d)) {
      double lo = prev->first, hi = h;
      const int s_lo = sign_of(prev->second);
      bool ok = true;
      while (hi - lo > opt.refine_tol) {
        const double mid = 0.5 * (lo + hi);
        const auto dm = sample(mid);
        if (!dm) {
          ok = false;
          break;
        }
        const int sm = sign_of(*dm);
        if (sm == 0) {
          lo = hi = mid;
          break;
        }
        (sm == s_lo ? lo : hi) = mid;
      }
      if (ok) {
        LimitCycleRecord r;
        r.h_star = 0.5 * (lo + hi);
        r.bracket = {lo, hi};
        r.slope = (*d - prev->second) / (h - prev->first);
        r.stability = r.slope < 0.0 ? -1 : 1;
        r.epsilon = opt.epsilon;
        scan.records.push_back(r);
      }
    }
    prev = std::make_pair(h, *d);
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Analytic arcs eps -> lambda(eps)

struct ArcSpec {
  /// coeff_table[p][k-1] is the eps^k coefficient of lambda_{p+1}.
  std::array<std::vector<double>, 4> coeff_table{};

  static ArcSpec linear(double l1, double l2, double l3, double l4) {
    ArcSpec a;
    a.coeff_table = {std::vector<double>{l1}, {l2}, {l3}, {l4}};
    return a;
  }

  int truncation_order() const {
    std::size_t n = 0;
    for (const auto& c : coeff_table) n = std::max(n, c.size());
    return static_cast<int>(n);
  }

  double coeff(int param, int k) const {
    const auto& c = coeff_table[static_cast<std::size_t>(param)];
    return k >= 1 && k <= static_cast<int>(c.size()) ? c[static_cast<std::size_t>(k - 1)] : 0.0;
  }

  PerturbationParams at(double eps) const {
    std::array<double, 4> v{};
    for (int p = 0; p < 4; ++p) {
      double acc = 0.0;
      for (int k = truncation_order(); k >= 1; --k) acc = (acc + coeff(p, k)) * eps;
      v[p] = acc;
    }
    return {v[0], v[1], v[2], v[3]};
  }

  MelnikovSpec melnikov_spec(int k) const {
    return MelnikovSpec::make(k, coeff(0, k), coeff(3, k), coeff_table[1], coeff_table[2]);
  }

  /// Lowest k whose Melnikov spec is nonzero, if any up to twice the truncation order.
  std::optional<int> leading_order() const {
    for (int k = 1; k <= 2 * std::max(1, truncation_order()); ++k) {
      if (!melnikov_spec(k).is_zero()) return k;
    }
    return std::nullopt;
  }

  bool m1_vanishes() const { return coeff(0, 1) == 0.0 && coeff(3, 1) == 0.0; }
};

struct ConvergenceRow {
  double eps = 0.0;
  double h = 0.0;
  int k = 1;
  double scaled_displacement = 0.0;  // displacement / eps^k
  double mk = 0.0;                   // per-lobe normalised M_k(h)
  double ratio = 0.0;                // scaled_displacement / (scale * mk)
};

/// Displacement / eps^k against scale * M_k(h). `scale` is the factor between
/// the return-map displacement and the per-lobe normalised M_k.
inline std::vector<ConvergenceRow> melnikov_convergence(const ArcSpec& arc, const std::vector<double>& h_probe,
                                                        const std::vector<double>& eps_seq,
                                                        const IntegratorConfig& cfg = {},
                                                        double scale = kContourNormalization,
                                                        std::optional<int> order = std::nullopt,
                                                        const QuadratureConfig& qcfg = {}) {
  const int k = order.value_or(arc.leading_order().value_or(1));
  const MelnikovSpec spec = arc.melnikov_spec(k);
  const QuadratureBackend backend{qcfg};
  std::vector<ConvergenceRow> rows;
  for (double h : h_probe) {
    const double m = mk(h, spec, backend);
    for (double eps : eps_seq) {
      ConvergenceRow r;
      r.eps = eps;
      r.h = h;
      r.k = k;
      r.scaled_displacement = displacement(h, arc.at(eps), cfg) / std::pow(eps, k);
      r.mk = m;
      r.ratio = m != 0.0 ? r.scaled_displacement / (scale * m) : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace eightloop
