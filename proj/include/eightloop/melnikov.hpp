#pragma once

// Melnikov functions of the exterior annulus,
//   M_k(h) = l1k I0(h) + l4k I2(h) + c_cross I4'(h),
//   c_cross = (1/3) sum_{i+j=k} l2i l3j,
// their vanishing-cycle counterparts (reduced log series), and a real zero
// counter used for empirical bounds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eightloop/abelian_integrals.hpp"
#include "eightloop/error.hpp"
#include "eightloop/series.hpp"

namespace eightloop {

/// Coefficients (l2i)_{i>=1}, (l3j)_{j>=1} of one arc contributing to a cross term.
struct CrossSeries {
  std::vector<double> lam2;
  std::vector<double> lam3;
};

struct MelnikovSpec {
  int k = 1;
  double lam1k = 0.0;
  double lam4k = 0.0;
  /// Summed cross contributions; specs of equal order add by concatenation.
  std::vector<CrossSeries> cross_terms;

  static MelnikovSpec first_order(double lam1, double lam4) { return {1, lam1, lam4, {}}; }

  static MelnikovSpec make(int k, double lam1k, double lam4k, std::vector<double> lam2, std::vector<double> lam3) {
    MelnikovSpec s{k, lam1k, lam4k, {}};
    s.cross_terms.push_back({std::move(lam2), std::move(lam3)});
    return s;
  }

  /// Order-k spec whose I4' coefficient is exactly `cross`.
  static MelnikovSpec with_cross(int k, double lam1k, double lam4k, double cross) {
    if (k < 2) throw Error(ErrorCode::OutOfRange, "cross terms need k >= 2");
    std::vector<double> lam3(static_cast<std::size_t>(k - 1), 0.0);
    lam3.back() = 1.0;
    return make(k, lam1k, lam4k, {3.0 * cross}, std::move(lam3));
  }

  /// (1/3) sum_{i+j=k, i,j>=1} l2i l3j, recomputed on every call.
  double cross() const {
    double sum = 0.0;
    for (const auto& c : cross_terms) {
      for (int i = 1; i < k; ++i) {
        const int j = k - i;
        if (i <= static_cast<int>(c.lam2.size()) && j <= static_cast<int>(c.lam3.size())) {
          sum += c.lam2[i - 1] * c.lam3[j - 1];
        }
      }
    }
    return sum / 3.0;
  }

  bool is_zero() const { return lam1k == 0.0 && lam4k == 0.0 && cross() == 0.0; }

  friend MelnikovSpec operator+(const MelnikovSpec& a, const MelnikovSpec& b) {
    if (a.k != b.k) throw Error(ErrorCode::OutOfRange, "only specs of equal order can be added");
    MelnikovSpec s = a;
    s.lam1k += b.lam1k;
    s.lam4k += b.lam4k;
    s.cross_terms.insert(s.cross_terms.end(), b.cross_terms.begin(), b.cross_terms.end());
    return s;
  }
};

/// (I0, I2, I4') at one energy.
struct IntegralBasis {
  double I0 = 0.0;
  double I2 = 0.0;
  double I4p = 0.0;
};

struct QuadratureBackend {
  QuadratureConfig cfg{};

  IntegralBasis operator()(double h) const {
    return {integral_xiy(h, 0, cfg).value, integral_xiy(h, 2, cfg).value, integral_xi_over_y(h, 4, cfg).value};
  }
};

struct SeriesBackend {
  FittedConstants consts{};

  IntegralBasis operator()(double h) const {
    return {series_eval(SeriesIntegral::I0, h, consts), series_eval(SeriesIntegral::I2, h, consts),
            series_eval(SeriesIntegral::I4p, h, consts)};
  }
};

template <class Backend>
double m1(double h, double lam1, double lam4, const Backend& backend) {
  if (lam1 == 0.0 && lam4 == 0.0) return 0.0;
  const IntegralBasis b = backend(h);
  return lam1 * b.I0 + lam4 * b.I2;
}

template <class Backend>
double mk(double h, const MelnikovSpec& spec, const Backend& backend) {
  const double cross = spec.k == 1 ? 0.0 : spec.cross();
  if (spec.lam1k == 0.0 && spec.lam4k == 0.0 && cross == 0.0) return 0.0;
  const IntegralBasis b = backend(h);
  return spec.lam1k * b.I0 + spec.lam4k * b.I2 + cross * b.I4p;
}

/// Vanishing-cycle Melnikov function with the factor 2 pi i divided out.
inline double mk_tilde(double h, const MelnikovSpec& spec) {
  const double cross = spec.k == 1 ? 0.0 : spec.cross();
  return spec.lam1k * tilde_series_eval(SeriesIntegral::I0, h) +
         spec.lam4k * tilde_series_eval(SeriesIntegral::I2, h) +
         cross * tilde_series_eval(SeriesIntegral::I4p, h);
}

/// M_k(h) = c0 + c1 h ln h + c2 h + ...
struct LeadingCoeffs {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

inline LeadingCoeffs leading_coeffs(const MelnikovSpec& spec, const FittedConstants& consts) {
  const double cross = spec.k == 1 ? 0.0 : spec.cross();
  LeadingCoeffs c;
  c.c0 = spec.lam1k * (4.0 / 3.0) + spec.lam4k * (16.0 / 15.0) + cross * (16.0 / 3.0);
  c.c1 = -spec.lam1k;
  c.c2 = spec.lam1k * consts.a1 + spec.lam4k * 4.0 + cross * 4.0;
  return c;
}

// ---------------------------------------------------------------------------
// Zero counting

enum class GridSpacing { Linear, Logarithmic };

struct ZeroBracket {
  double h = 0.0;      // refined location (bracket midpoint)
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct ZeroCount {
  std::pair<double, double> interval{0.0, 0.0};
  std::vector<ZeroBracket> zeros;
  int count = 0;
  /// Interior grid minima of |f| without a sign change but below the
  /// near-zero threshold: possible zeros of even multiplicity.
  std::vector<double> suspects;
  std::string caveat =
      "zeros counted by sign changes on a grid; even-multiplicity zeros can only appear as suspects";
};

struct ZeroCountOptions {
  GridSpacing spacing = GridSpacing::Linear;
  /// Relative to max |f| on the grid.
  double suspect_threshold = 1e-6;
  int max_bisections = 200;
};

inline std::vector<double> make_grid(std::pair<double, double> interval, int n, GridSpacing spacing) {
  std::vector<double> g(static_cast<std::size_t>(n));
  const auto [lo, hi] = interval;
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / (n - 1);
    g[i] = spacing == GridSpacing::Logarithmic ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)))
                                               : lo + u * (hi - lo);
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

template <class F>
ZeroCount count_zeros(F&& f, std::pair<double, double> interval, int grid_n, double refine_tol,
                      const ZeroCountOptions& opt = {}) {
  if (grid_n < 32) throw Error(ErrorCode::OutOfRange, "zero counting needs grid_n >= 32");
  if (!(interval.first < interval.second)) throw Error(ErrorCode::OutOfRange, "empty interval");
  if (opt.spacing == GridSpacing::Logarithmic && !(interval.first > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "logarithmic grid needs a positive lower end");
  }
  const std::vector<double> grid = make_grid(interval, grid_n, opt.spacing);
  std::vector<double> values(grid.size());
  double fmax = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = f(grid[i]);
    fmax = std::max(fmax, std::abs(values[i]));
  }

  ZeroCount out;
  out.interval = interval;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double fa = values[i];
    const double fb = values[i + 1];
    if (fa == 0.0 && i > 0) {
      out.zeros.push_back({grid[i], grid[i], grid[i]});
      continue;
    }
    if (!((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0))) continue;
    double lo = grid[i];
    double hi = grid[i + 1];
    const bool neg_lo = fa < 0.0;
    for (int it = 0; it < opt.max_bisections && hi - lo > refine_tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      const double fm = f(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      ((fm < 0.0) == neg_lo ? lo : hi) = mid;
    }
    out.zeros.push_back({0.5 * (lo + hi), lo, hi});
  }
  out.count = static_cast<int>(out.zeros.size());

  const double near_zero = opt.suspect_threshold * fmax;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double a = std::abs(values[i]);
    const bool same_sign = (values[i - 1] > 0.0) == (values[i] > 0.0) && (values[i] > 0.0) == (values[i + 1] > 0.0);
    if (values[i] != 0.0 && same_sign && a <= std::abs(values[i - 1]) && a <= std::abs(values[i + 1]) &&
        a < near_zero) {
      out.suspects.push_back(grid[i]);
    }
  }
  return out;
}

}  // namespace eightloop
