#pragma once

// Dormand-Prince 5(4) embedded pair with FSAL and the order-4 continuous
// extension of Hairer, Norsett & Wanner (routine DOPRI5), for small fixed-size
// states.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <utility>

#include "eightloop/error.hpp"

namespace eightloop {

template <std::size_t N>
using State = std::array<double, N>;

/// Everything needed to evaluate the accepted step's interpolant.
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double dt = 0.0;
  std::array<State<N>, 5> rcont{};

  State<N> operator()(double t) const {
    const double theta = (t - t0) / dt;
    const double theta1 = 1.0 - theta;
    State<N> y{};
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = rcont[0][i] +
             theta * (rcont[1][i] + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])));
    }
    return y;
  }
  double t1() const { return t0 + dt; }
};

struct StepControl {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_step = 1e-3;
  double max_step = 0.5;
  long max_steps = 2'000'000;
};

template <std::size_t N, class Rhs>
class DormandPrince5 {
 public:
  DormandPrince5(Rhs rhs, State<N> y0, double t0, StepControl ctl)
      : rhs_(std::move(rhs)), y_(y0), t_(t0), dt_(ctl.initial_step), ctl_(ctl) {
    k1_ = rhs_(t_, y_);
  }

  double time() const { return t_; }
  const State<N>& state() const { return y_; }
  long steps() const { return steps_; }
  const DenseStep<N>& last_step() const { return dense_; }

  /// One explicit step of exactly `dt` from the start of the last accepted
  /// step, without moving the integrator. Used to land on event times.
  State<N> probe_from_last(double dt) const {
    State<N> y1, err;
    std::array<State<N>, 7> k;
    stages(last_y0_, dense_.t0, dt, last_k1_, y1, err, k);
    return y1;
  }

  /// Advances by one accepted step, never past `t_limit`.
  void step(double t_limit) {
    for (;;) {
      if (++steps_ > ctl_.max_steps) throw Error(ErrorCode::StepFailure, "step budget exhausted");
      double dt = std::min({dt_, ctl_.max_step, t_limit - t_});
      if (!(dt > std::abs(t_) * 4.0 * std::numeric_limits<double>::epsilon()) || !(dt > 1e-14)) {
        throw Error(ErrorCode::StepFailure, "step size underflow");
      }
      State<N> y1, err;
      std::array<State<N>, 7> k;
      stages(y_, t_, dt, k1_, y1, err, k);
      double norm = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double sc = ctl_.abs_tol + ctl_.rel_tol * std::max(std::abs(y_[i]), std::abs(y1[i]));
        norm += (err[i] / sc) * (err[i] / sc);
      }
      norm = std::sqrt(norm / N);
      if (!std::isfinite(norm)) {
        dt_ = 0.1 * dt;
        continue;
      }
      const double fac = std::clamp(0.9 * std::pow(std::max(norm, 1e-10), -0.2), 0.2, 5.0);
      if (norm <= 1.0) {
        build_dense(dt, y1, k);
        last_y0_ = y_;
        last_k1_ = k1_;
        y_ = y1;
        t_ += dt;
        k1_ = k[6];
        dt_ = dt * fac;
        return;
      }
      dt_ = dt * std::min(1.0, fac);
    }
  }

 private:
  void stages(const State<N>& y0, double t0, double dt, const State<N>& k1, State<N>& y1, State<N>& err,
              std::array<State<N>, 7>& k) const {
    constexpr double a21 = 1.0 / 5.0;
    constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                     a54 = -212.0 / 729.0;
    constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                     a65 = -5103.0 / 18656.0;
    constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                     a76 = 11.0 / 84.0;
    constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                     e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    k[0] = k1;
    State<N> tmp;
    auto combine = [&](std::initializer_list<std::pair<int, double>> terms) {
      for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (const auto& [j, a] : terms) s += a * k[j][i];
        tmp[i] = y0[i] + dt * s;
      }
      return tmp;
    };
    k[1] = rhs_(t0 + dt / 5.0, combine({{0, a21}}));
    k[2] = rhs_(t0 + 3.0 * dt / 10.0, combine({{0, a31}, {1, a32}}));
    k[3] = rhs_(t0 + 4.0 * dt / 5.0, combine({{0, a41}, {1, a42}, {2, a43}}));
    k[4] = rhs_(t0 + 8.0 * dt / 9.0, combine({{0, a51}, {1, a52}, {2, a53}, {3, a54}}));
    k[5] = rhs_(t0 + dt, combine({{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}}));
    y1 = combine({{0, a71}, {2, a73}, {3, a74}, {4, a75}, {5, a76}});
    k[6] = rhs_(t0 + dt, y1);
    for (std::size_t i = 0; i < N; ++i) {
      err[i] = dt * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
    }
  }

  void build_dense(double dt, const State<N>& y1, const std::array<State<N>, 7>& k) {
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    dense_.t0 = t_;
    dense_.dt = dt;
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = y1[i] - y_[i];
      const double bspl = dt * k[0][i] - ydiff;
      dense_.rcont[0][i] = y_[i];
      dense_.rcont[1][i] = ydiff;
      dense_.rcont[2][i] = bspl;
      dense_.rcont[3][i] = ydiff - dt * k[6][i] - bspl;
      dense_.rcont[4][i] =
          dt * (d1 * k[0][i] + d3 * k[2][i] + d4 * k[3][i] + d5 * k[4][i] + d6 * k[5][i] + d7 * k[6][i]);
    }
  }

  Rhs rhs_;
  State<N> y_;
  double t_;
  double dt_;
  StepControl ctl_;
  State<N> k1_{};
  State<N> last_y0_{};
  State<N> last_k1_{};
  DenseStep<N> dense_{};
  long steps_ = 0;
};

}  // namespace eightloop
