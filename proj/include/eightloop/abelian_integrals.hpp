#pragma once

// Complete elliptic integrals over the exterior oval H = h > 0:
//   I_i(h)  = contour integral of x^i y dx,
//   I_i'(h) = contour integral of x^i / y dx   (= dI_i/dh).
//
// With x = x_plus sin(t) the factor sqrt(x_plus^2 - x^2) cancels against dx,
// and the whole oval becomes t in [0, 2 pi) with
//   y = x_plus cos(t) g(t),   g(t) = sqrt((x_plus^2 sin^2 t + x_minus^2) / 2).
// Both integrands are then smooth and periodic in t, and h enters only
// through x_plus^2 and x_minus^2, so h-derivatives of any order are bounded
// integrals obtained by differentiating the integrand (forward-mode autodiff).
//
// Reported values are per-lobe normalised: the full-contour integral divided
// by kContourNormalization = 2, matching the limits 4/3, 16/15, 16/3 at h = 0.

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/differentiation/autodiff.hpp>

#include "eightloop/error.hpp"
#include "eightloop/hamiltonian.hpp"
#include "eightloop/quadrature.hpp"

namespace eightloop {

inline constexpr double kContourNormalization = 2.0;

/// Smallest h at which quadrature accuracy is guaranteed; use the series below.
inline constexpr double kQuadratureFloor = 1e-4;

enum class MomentForm {
  XiY,      ///< x^i y dx
  XiOverY,  ///< x^i / y dx
};

struct IntegralErrors {
  double I0 = 0.0, I1 = 0.0, I2 = 0.0;
  double I0p = 0.0, I2p = 0.0, I4p = 0.0;
  double I0pp = 0.0;
};

struct IntegralTriple {
  double h = 0.0;
  double I0 = 0.0, I1 = 0.0, I2 = 0.0;
  double I0p = 0.0, I2p = 0.0, I4p = 0.0;
  double I0pp = 0.0;
  IntegralErrors err;
  bool converged = true;
};

namespace detail {

template <class Real>
Real int_pow(Real base, int n) {
  Real r = base * 0.0 + 1.0;
  for (int k = 0; k < n; ++k) r = r * base;
  return r;
}

/// Integrand in t of the full-contour moment, as a function of h.
template <class Real>
Real oval_integrand(MomentForm form, int power, double t, const Real& h) {
  using std::sqrt;
  const Real s = sqrt(4.0 * h + 1.0);
  const Real p = s + 1.0;        // x_plus^2
  const Real m = (4.0 * h) / p;  // x_minus^2 = s - 1 without cancellation
  const double sn = std::sin(t);
  const double cs = std::cos(t);
  const Real g = sqrt((p * (sn * sn) + m) * 0.5);
  const double sn_pow = std::pow(sn, power);
  if (form == MomentForm::XiY) {
    return int_pow(sqrt(p), power + 2) * g * (sn_pow * cs * cs);
  }
  return int_pow(sqrt(p), power) * (sn_pow / g);
}

template <int Order>
double oval_integrand_derivative(MomentForm form, int power, double t, double h) {
  if constexpr (Order == 0) {
    return oval_integrand(form, power, t, h);
  } else {
    namespace ad = boost::math::differentiation;
    const auto hv = ad::make_fvar<double, Order>(h);
    return static_cast<double>(oval_integrand(form, power, t, hv).derivative(Order));
  }
}

template <int Order>
QuadratureResult full_contour_derivative(MomentForm form, int power, double h, const QuadratureConfig& cfg) {
  auto f = [=](double t) { return oval_integrand_derivative<Order>(form, power, t, h); };
  constexpr double pi = std::numbers::pi;
  if (power % 2 == 0) {
    // Even moments have the quarter-period symmetry t -> -t, t -> pi - t.
    QuadratureResult r = integrate_adaptive(f, 0.0, 0.5 * pi, cfg.tightened(4.0));
    r *= 4.0;
    return r;
  }
  return integrate_adaptive(f, 0.0, 2.0 * pi, cfg);
}

inline void check_moment_args(double h, int power) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::NonPositiveEnergy, "oval integrals need finite h > 0");
  }
  if (power < 0 || power > 16) throw Error(ErrorCode::OutOfRange, "moment power must lie in [0, 16]");
}

}  // namespace detail

/// d^derivative/dh^derivative of the full-contour moment (no normalisation).
/// `derivative` ranges over 0..3.
inline QuadratureResult full_contour_integral(MomentForm form, int power, double h,
                                              const QuadratureConfig& cfg = {}, int derivative = 0) {
  detail::check_moment_args(h, power);
  switch (derivative) {
    case 0: return detail::full_contour_derivative<0>(form, power, h, cfg);
    case 1: return detail::full_contour_derivative<1>(form, power, h, cfg);
    case 2: return detail::full_contour_derivative<2>(form, power, h, cfg);
    case 3: return detail::full_contour_derivative<3>(form, power, h, cfg);
    default: throw Error(ErrorCode::OutOfRange, "h-derivative order must lie in [0, 3]");
  }
}

/// Per-lobe normalised moment or one of its h-derivatives.
inline QuadratureResult moment(MomentForm form, int power, double h, const QuadratureConfig& cfg = {},
                               int derivative = 0) {
  // The panel tolerance is applied to the raw value, so tighten the absolute
  // part to keep the normalised error below abs_tol.
  QuadratureConfig raw = cfg;
  raw.abs_tol *= kContourNormalization;
  QuadratureResult r = full_contour_integral(form, power, h, raw, derivative);
  r *= 1.0 / kContourNormalization;
  return r;
}

inline QuadratureResult integral_xiy(double h, int i, const QuadratureConfig& cfg = {}) {
  return moment(MomentForm::XiY, i, h, cfg);
}

inline QuadratureResult integral_xi_over_y(double h, int i, const QuadratureConfig& cfg = {}) {
  return moment(MomentForm::XiOverY, i, h, cfg);
}

/// I_0''(h), i.e. the regularised form of -contour integral of dx / y^3.
inline QuadratureResult integral_I0pp(double h, const QuadratureConfig& cfg = {}) {
  return moment(MomentForm::XiOverY, 0, h, cfg, 1);
}

inline IntegralTriple integral_triple(double h, const QuadratureConfig& cfg = {}) {
  IntegralTriple t;
  t.h = h;
  auto take = [&t](const QuadratureResult& r, double& value, double& err) {
    value = r.value;
    err = r.error;
    t.converged = t.converged && r.converged;
  };
  take(integral_xiy(h, 0, cfg), t.I0, t.err.I0);
  take(integral_xiy(h, 1, cfg), t.I1, t.err.I1);
  take(integral_xiy(h, 2, cfg), t.I2, t.err.I2);
  take(integral_xi_over_y(h, 0, cfg), t.I0p, t.err.I0p);
  take(integral_xi_over_y(h, 2, cfg), t.I2p, t.err.I2p);
  take(integral_xi_over_y(h, 4, cfg), t.I4p, t.err.I4p);
  take(integral_I0pp(h, cfg), t.I0pp, t.err.I0pp);
  return t;
}

inline void require_converged(const QuadratureResult& r) {
  if (!r.converged) {
    throw Error(ErrorCode::ToleranceNotMet, "quadrature error estimate " + std::to_string(r.error) +
                                                " above tolerance");
  }
}

/// lim_{h->0+} of the full-contour I_0 divided by the per-lobe constant 4/3.
///
/// The constant term is extrapolated from three energies using the model
/// c + alpha h ln h + beta h, whose neglected terms are O(h^2 ln h).
inline double measure_contour_normalization(const QuadratureConfig& cfg = {1e-15, 1e-14, 400}) {
  const std::array<double, 3> hs = {1e-4, 3e-4, 1e-3};
  double a[3][3];
  double rhs[3];
  for (int r = 0; r < 3; ++r) {
    a[r][0] = 1.0;
    a[r][1] = hs[r] * std::log(hs[r]);
    a[r][2] = hs[r];
    rhs[r] = full_contour_integral(MomentForm::XiY, 0, hs[r], cfg).value;
  }
  // Cramer's rule for the constant term.
  auto det3 = [](double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  double num[3][3];
  for (int r = 0; r < 3; ++r) {
    num[r][0] = rhs[r];
    num[r][1] = a[r][1];
    num[r][2] = a[r][2];
  }
  return det3(num) / det3(a) / (4.0 / 3.0);
}

}  // namespace eightloop
