#pragma once

// Picard-Fuchs relations and small-h expansions of I0, I2, I4' near the
// eight-loop:
//   J(h) = L(h) ln h + A(h),    L, A analytic at h = 0.
// L is also (up to the factor 2 pi i) the integral over the vanishing cycle,
// so the "tilde" integrals are represented by L alone.
//
// The log series L are generated exactly from the Picard-Fuchs system:
//   L0:  4h(4h+1) L0'' = -3 L0,  L0 = -h + ...
//   L2:  L2' = 3 L0 - 4h L0'           (first relation, log part)
//   L4p: (4h+1) L4p = 4h L0 + 5 L2     (third relation, log part)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include "eightloop/abelian_integrals.hpp"
#include "eightloop/error.hpp"

namespace eightloop {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

enum class SeriesIntegral { I0, I2, I4p };

constexpr std::string_view to_string(SeriesIntegral w) noexcept {
  switch (w) {
    case SeriesIntegral::I0: return "I0";
    case SeriesIntegral::I2: return "I2";
    case SeriesIntegral::I4p: return "I4p";
  }
  return "?";
}

inline constexpr std::array<SeriesIntegral, 3> kSeriesIntegrals = {SeriesIntegral::I0, SeriesIntegral::I2,
                                                                   SeriesIntegral::I4p};

/// Largest h at which the truncated expansions are trusted.
inline constexpr double kSeriesTrustRadius = 0.2;

/// Highest power for which the exact recurrences stay inside 64-bit rationals.
inline constexpr int kMaxLogOrder = 12;

// ---------------------------------------------------------------------------
// Exact coefficients

/// Coefficients L_n of h^n ln h, n = 0..order, from the Picard-Fuchs recurrences.
inline std::vector<Rational> log_coefficients(SeriesIntegral which, int order = kMaxLogOrder) {
  if (order < 0 || order > kMaxLogOrder) throw Error(ErrorCode::OutOfRange, "log series order out of range");
  const int n_max = kMaxLogOrder;
  std::vector<Rational> f(n_max + 1, Rational(0));
  f[1] = Rational(-1);
  for (int n = 1; n < n_max; ++n) {
    f[n + 1] = f[n] * Rational(-(16 * n * (n - 1) + 3), 4 * n * (n + 1));
  }
  std::vector<Rational> out;
  if (which == SeriesIntegral::I0) {
    out = f;
  } else {
    std::vector<Rational> g(n_max + 1, Rational(0));
    for (int n = 1; n < n_max; ++n) g[n + 1] = f[n] * Rational(3 - 4 * n, n + 1);
    if (which == SeriesIntegral::I2) {
      out = g;
    } else {
      std::vector<Rational> l(n_max + 1, Rational(0));
      for (int n = 0; n <= n_max; ++n) {
        l[n] = Rational(5) * g[n];
        if (n >= 1) l[n] += Rational(4) * f[n - 1] - Rational(4) * l[n - 1];
      }
      out = l;
    }
  }
  out.resize(order + 1);
  return out;
}

/// Value at h = 0 of each integral: the per-lobe areas of the eight-loop.
inline Rational loop_constant(SeriesIntegral which) {
  switch (which) {
    case SeriesIntegral::I0: return Rational(4, 3);
    case SeriesIntegral::I2: return Rational(16, 15);
    case SeriesIntegral::I4p: return Rational(16, 3);
  }
  return Rational(0);
}

/// The expansion tables in the form they are usually printed: exact log
/// coefficients through the printed order, and analytic coefficients that
/// are exact rationals where known and fitted (masked) otherwise.
struct SeriesExpansion {
  SeriesIntegral which = SeriesIntegral::I0;
  std::vector<Rational> log_coeffs;
  std::vector<std::optional<Rational>> analytic_exact;
  std::vector<double> analytic_coeffs;  // filled where fitted, NaN if unknown
  std::vector<bool> fitted_mask;
  int order = 0;
};

/// Verbatim copies of the published expansions, kept for auditing.
inline SeriesExpansion printed_expansion(SeriesIntegral which) {
  SeriesExpansion e;
  e.which = which;
  const double nan = std::nan("");
  switch (which) {
    case SeriesIntegral::I0:
      e.log_coeffs = {Rational(0), Rational(-1), Rational(3, 8), Rational(-35, 64)};
      e.analytic_exact = {Rational(4, 3), std::nullopt, std::nullopt};
      break;
    case SeriesIntegral::I2:
      e.log_coeffs = {Rational(0), Rational(0), Rational(1, 2), Rational(-5, 8), Rational(-315, 256)};
      e.analytic_exact = {Rational(16, 15), Rational(4), std::nullopt};
      break;
    case SeriesIntegral::I4p:
      e.log_coeffs = {Rational(0), Rational(0), Rational(-3, 2), Rational(35, 8), Rational(-471, 256)};
      // h^2 entry printed as 4 a1 + 5 b2 - 304/3.
      e.analytic_exact = {Rational(16, 3), Rational(4), std::nullopt};
      break;
  }
  e.order = static_cast<int>(e.log_coeffs.size()) - 1;
  for (const auto& a : e.analytic_exact) {
    e.analytic_coeffs.push_back(a ? to_double(*a) : nan);
    e.fitted_mask.push_back(!a.has_value());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Picard-Fuchs residuals

struct PFResiduals {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0;
  double max() const { return std::max({r1, r2, r3, r4}); }
};

namespace detail {
inline double relative_gap(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}
}  // namespace detail

inline PFResiduals pf_residuals(const IntegralTriple& t) {
  const double h = t.h;
  PFResiduals r;
  r.r1 = detail::relative_gap(t.I0, 4.0 / 3.0 * h * t.I0p + t.I2p / 3.0);
  r.r2 = detail::relative_gap(t.I2, 4.0 / 15.0 * h * t.I0p + (0.8 * h + 4.0 / 15.0) * t.I2p);
  r.r3 = detail::relative_gap((4.0 * h + 1.0) * t.I4p, 4.0 * h * t.I0 + 5.0 * t.I2);
  r.r4 = detail::relative_gap(4.0 * h * (4.0 * h + 1.0) * t.I0pp, -3.0 * t.I0);
  return r;
}

// ---------------------------------------------------------------------------
// Fitted analytic coefficients

/// Unknown analytic coefficients of the three expansions:
///   A0 = 4/3 + a1 h + a2 h^2 + a3 h^3,
///   A2 = 16/15 + 4 h + b2 h^2 + b3 h^3,
///   A4p = 16/3 + 4 h + i4p_h2 h^2 + i4p_h3 h^3.
struct FittedConstants {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double b2 = 0.0, b3 = 0.0;
  double i4p_h2 = 0.0, i4p_h3 = 0.0;
  double residual = 0.0;
  std::pair<double, double> window{0.01, 0.15};
  double kappa = kContourNormalization;
  double condition = 0.0;  // largest normal-matrix condition number among the three fits
};

struct FitOptions {
  std::pair<double, double> window{0.01, 0.15};
  /// Highest analytic power in the fit; powers above 3 are nuisance terms.
  int analytic_degree = 6;
  double max_condition = 1e10;
};

/// The exactly known part of an expansion:
/// every log term (through kMaxLogOrder) and the exact analytic coefficients.
inline double series_known_part(SeriesIntegral which, double h) {
  const auto logs = log_coefficients(which);
  double lp = 0.0;
  for (int n = static_cast<int>(logs.size()) - 1; n >= 1; --n) lp = (lp + to_double(logs[n])) * h;
  const double log_h = h > 0.0 ? std::log(h) : 0.0;
  double known = (h > 0.0 ? lp * log_h : 0.0) + to_double(loop_constant(which));
  if (which != SeriesIntegral::I0) known += 4.0 * h;
  return known;
}

namespace detail {

inline int first_free_power(SeriesIntegral which) { return which == SeriesIntegral::I0 ? 1 : 2; }

struct LinearFit {
  Eigen::VectorXd coeffs;
  double rms = 0.0;
  double normal_condition = 0.0;
};

/// Least squares with column equilibration; reports cond(A^T A) of the scaled design.
inline LinearFit solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs) {
  Eigen::VectorXd scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale(j) == 0.0) scale(j) = 1.0;
  }
  const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  LinearFit fit;
  const double smin = sv(sv.size() - 1);
  fit.normal_condition = smin > 0.0 ? std::pow(sv(0) / smin, 2) : std::numeric_limits<double>::infinity();
  fit.coeffs = svd.solve(rhs).cwiseQuotient(scale);
  const Eigen::VectorXd res = design * fit.coeffs - rhs;
  fit.rms = std::sqrt(res.squaredNorm() / static_cast<double>(rhs.size()));
  return fit;
}

inline double triple_value(const IntegralTriple& t, SeriesIntegral which) {
  switch (which) {
    case SeriesIntegral::I0: return t.I0;
    case SeriesIntegral::I2: return t.I2;
    case SeriesIntegral::I4p: return t.I4p;
  }
  return 0.0;
}

}  // namespace detail

/// Least-squares fit of the unknown analytic coefficients after subtracting
/// all exactly known terms. Samples outside the window are ignored.
inline FittedConstants fit_constants(const std::vector<IntegralTriple>& samples, const FitOptions& opt = {}) {
  std::vector<const IntegralTriple*> used;
  for (const auto& s : samples) {
    if (s.h >= opt.window.first && s.h <= opt.window.second) used.push_back(&s);
  }
  if (used.size() < 8) throw Error(ErrorCode::OutOfRange, "need at least 8 samples inside the fit window");
  if (opt.analytic_degree < 3) throw Error(ErrorCode::OutOfRange, "analytic degree must be >= 3");

  FittedConstants out;
  out.window = opt.window;
  for (SeriesIntegral which : kSeriesIntegrals) {
    const int p0 = detail::first_free_power(which);
    const int cols = opt.analytic_degree - p0 + 1;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(used.size()), cols);
    Eigen::VectorXd b(static_cast<Eigen::Index>(used.size()));
    for (std::size_t r = 0; r < used.size(); ++r) {
      const double h = used[r]->h;
      for (int c = 0; c < cols; ++c) a(static_cast<Eigen::Index>(r), c) = std::pow(h, p0 + c);
      b(static_cast<Eigen::Index>(r)) = detail::triple_value(*used[r], which) - series_known_part(which, h);
    }
    const detail::LinearFit fit = detail::solve_least_squares(a, b);
    if (fit.normal_condition > opt.max_condition) {
      throw Error(ErrorCode::IllConditionedFit,
                  "normal system condition " + std::to_string(fit.normal_condition) + " for " +
                      std::string(to_string(which)));
    }
    out.residual = std::max(out.residual, fit.rms);
    out.condition = std::max(out.condition, fit.normal_condition);
    const auto coef = [&](int power) { return fit.coeffs(power - p0); };
    switch (which) {
      case SeriesIntegral::I0:
        out.a1 = coef(1);
        out.a2 = coef(2);
        out.a3 = coef(3);
        break;
      case SeriesIntegral::I2:
        out.b2 = coef(2);
        out.b3 = coef(3);
        break;
      case SeriesIntegral::I4p:
        out.i4p_h2 = coef(2);
        out.i4p_h3 = coef(3);
        break;
    }
  }
  return out;
}

/// Quadrature samples on an even grid covering the fit window.
inline std::vector<IntegralTriple> sample_triples(std::pair<double, double> window, int n,
                                                  const QuadratureConfig& cfg = {}) {
  std::vector<IntegralTriple> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double h = window.first + (window.second - window.first) * k / std::max(1, n - 1);
    out.push_back(integral_triple(h, cfg));
  }
  return out;
}

/// Evaluation-ready expansion: exact log coefficients through h^4 ln h and
/// analytic coefficients through h^3.
inline SeriesExpansion expansion(SeriesIntegral which, const FittedConstants& c) {
  SeriesExpansion e;
  e.which = which;
  e.order = 4;
  e.log_coeffs = log_coefficients(which, 4);
  std::array<double, 4> fitted{};
  switch (which) {
    case SeriesIntegral::I0:
      e.analytic_exact = {Rational(4, 3), std::nullopt, std::nullopt, std::nullopt};
      fitted = {0.0, c.a1, c.a2, c.a3};
      break;
    case SeriesIntegral::I2:
      e.analytic_exact = {Rational(16, 15), Rational(4), std::nullopt, std::nullopt};
      fitted = {0.0, 0.0, c.b2, c.b3};
      break;
    case SeriesIntegral::I4p:
      e.analytic_exact = {Rational(16, 3), Rational(4), std::nullopt, std::nullopt};
      fitted = {0.0, 0.0, c.i4p_h2, c.i4p_h3};
      break;
  }
  for (std::size_t n = 0; n < e.analytic_exact.size(); ++n) {
    const auto& ex = e.analytic_exact[n];
    e.analytic_coeffs.push_back(ex ? to_double(*ex) : fitted[n]);
    e.fitted_mask.push_back(!ex.has_value());
  }
  return e;
}

inline double evaluate(const SeriesExpansion& e, double h) {
  double lp = 0.0;
  for (int n = static_cast<int>(e.log_coeffs.size()) - 1; n >= 1; --n) lp = (lp + to_double(e.log_coeffs[n])) * h;
  double ap = 0.0;
  for (int n = static_cast<int>(e.analytic_coeffs.size()) - 1; n >= 0; --n) ap = ap * h + e.analytic_coeffs[n];
  return (h > 0.0 ? lp * std::log(h) : 0.0) + ap;
}

inline double series_eval(SeriesIntegral which, double h, const FittedConstants& c) {
  if (!(h >= 0.0) || h > kSeriesTrustRadius) {
    throw Error(ErrorCode::OutOfTrustRegion, "series expansions are trusted for 0 <= h <= 0.2");
  }
  return evaluate(expansion(which, c), h);
}

/// Reduced vanishing-cycle integral: the log series divided by 2 pi i,
/// truncated at the printed order (h^3 for I0, h^4 for I2 and I4').
inline double tilde_series_eval(SeriesIntegral which, double h) {
  if (!(std::abs(h) <= kSeriesTrustRadius)) {
    throw Error(ErrorCode::OutOfTrustRegion, "tilde series are trusted for |h| <= 0.2");
  }
  const int order = which == SeriesIntegral::I0 ? 3 : 4;
  const auto logs = log_coefficients(which, order);
  double v = 0.0;
  for (int n = order; n >= 1; --n) v = (v + to_double(logs[n])) * h;
  return v;
}

// ---------------------------------------------------------------------------
// Free fit of the log coefficients from quadrature of J and its h-derivatives

struct LogFitOptions {
  std::pair<double, double> window{1e-4, 0.05};
  int n_points = 50;
  int log_terms = 9;        // h^1 ln h .. h^log_terms ln h
  int analytic_terms = 10;  // h^0 .. h^(analytic_terms - 1)
  int max_derivative = 2;  // rows for J, h J', ..., h^d J^(d)
  QuadratureConfig quadrature{1e-15, 1e-14, 400};
};

struct LogFit {
  SeriesIntegral which = SeriesIntegral::I0;
  std::vector<double> log_coeffs;       // index n -> coefficient of h^n ln h (index 0 unused)
  std::vector<double> analytic_coeffs;  // index n -> coefficient of h^n
  double rms = 0.0;
  double normal_condition = 0.0;
};

namespace detail {
inline std::pair<MomentForm, int> moment_of(SeriesIntegral which) {
  switch (which) {
    case SeriesIntegral::I0: return {MomentForm::XiY, 0};
    case SeriesIntegral::I2: return {MomentForm::XiY, 2};
    case SeriesIntegral::I4p: return {MomentForm::XiOverY, 4};
  }
  return {MomentForm::XiY, 0};
}
}  // namespace detail

/// Fits every coefficient of J = L ln h + A freely (nothing known is
/// subtracted), stacking J and its scaled h-derivatives. Because
/// h^d (h^n ln h)^(d) = P_d(n) h^n ln h + Q_d(n) h^n, all rows share one basis.
inline LogFit fit_log_coefficients(SeriesIntegral which, const LogFitOptions& opt = {}) {
  const auto [form, power] = detail::moment_of(which);
  const int rows_per_h = opt.max_derivative + 1;
  const int cols = opt.log_terms + opt.analytic_terms;
  Eigen::MatrixXd a(opt.n_points * rows_per_h, cols);
  Eigen::VectorXd b(opt.n_points * rows_per_h);
  const double l0 = std::log(opt.window.first);
  const double l1 = std::log(opt.window.second);
  for (int k = 0; k < opt.n_points; ++k) {
    const double h = std::exp(l0 + (l1 - l0) * k / std::max(1, opt.n_points - 1));
    const double log_h = std::log(h);
    for (int d = 0; d <= opt.max_derivative; ++d) {
      const int row = k * rows_per_h + d;
      b(row) = std::pow(h, d) * moment(form, power, h, opt.quadrature, d).value;
      for (int n = 1; n <= opt.log_terms; ++n) {
        double pd = 1.0, qd = 0.0;  // (h^n ln h)^(d) = h^(n-d) (pd ln h + qd)
        for (int j = 0; j < d; ++j) {
          qd = qd * (n - j) + pd;
          pd = pd * (n - j);
        }
        a(row, n - 1) = std::pow(h, n) * (pd * log_h + qd);
      }
      for (int n = 0; n < opt.analytic_terms; ++n) {
        double falling = 1.0;
        for (int j = 0; j < d; ++j) falling *= (n - j);
        a(row, opt.log_terms + n) = falling * std::pow(h, n);
      }
    }
  }
  const detail::LinearFit fit = detail::solve_least_squares(a, b);
  LogFit out;
  out.which = which;
  out.rms = fit.rms;
  out.normal_condition = fit.normal_condition;
  out.log_coeffs.assign(static_cast<std::size_t>(opt.log_terms) + 1, 0.0);
  for (int n = 1; n <= opt.log_terms; ++n) out.log_coeffs[n] = fit.coeffs(n - 1);
  for (int n = 0; n < opt.analytic_terms; ++n) out.analytic_coeffs.push_back(fit.coeffs(opt.log_terms + n));
  return out;
}

// ---------------------------------------------------------------------------
// Audit of the printed tables

struct CoefficientCheck {
  SeriesIntegral which = SeriesIntegral::I0;
  std::string term;       // e.g. "h^4 ln h" or "h^2"
  double printed = 0.0;   // published value
  double exact = 0.0;     // Picard-Fuchs recurrence (log terms) or fitted value (h^2)
  double quadrature = std::nan("");  // free quadrature fit, when supplied
  bool agrees = true;     // printed == exact (within analytic_tol for h^2)
};

/// Compares every printed log coefficient with the exact Picard-Fuchs value
/// (and, when `fits` is given, with the free quadrature fit), and the printed
/// h^2 coefficient of I4' with the fitted one. Mismatches are reported,
/// never corrected.
inline std::vector<CoefficientCheck> audit_printed_coefficients(const FittedConstants& c,
                                                                const std::vector<LogFit>& fits = {},
                                                                double analytic_tol = 1e-2) {
  std::vector<CoefficientCheck> out;
  for (SeriesIntegral which : kSeriesIntegrals) {
    const SeriesExpansion printed = printed_expansion(which);
    const auto exact = log_coefficients(which, printed.order);
    const LogFit* fit = nullptr;
    for (const auto& f : fits) {
      if (f.which == which) fit = &f;
    }
    for (int n = 1; n <= printed.order; ++n) {
      if (printed.log_coeffs[n] == Rational(0) && exact[n] == Rational(0)) continue;
      CoefficientCheck chk;
      chk.which = which;
      chk.term = "h^" + std::to_string(n) + " ln h";
      chk.printed = to_double(printed.log_coeffs[n]);
      chk.exact = to_double(exact[n]);
      if (fit && n < static_cast<int>(fit->log_coeffs.size())) chk.quadrature = fit->log_coeffs[n];
      chk.agrees = printed.log_coeffs[n] == exact[n];
      out.push_back(chk);
    }
  }
  CoefficientCheck q;
  q.which = SeriesIntegral::I4p;
  q.term = "h^2";
  q.printed = 4.0 * c.a1 + 5.0 * c.b2 - 304.0 / 3.0;
  q.exact = c.i4p_h2;
  q.agrees = std::abs(q.printed - q.exact) <= analytic_tol * std::max(1.0, std::abs(q.exact));
  out.push_back(q);
  return out;
}

}  // namespace eightloop
