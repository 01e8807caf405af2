// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails; failures are never relaxed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "eightloop/dynamics.hpp"
#include "eightloop/melnikov.hpp"
#include "eightloop/series.hpp"
#include "eightloop/sweep.hpp"

using namespace eightloop;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
  g_failures += !o.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const QuadratureConfig kTight{1e-15, 1e-14, 400};

double quad_value(SeriesIntegral w, double h, const QuadratureConfig& q) {
  switch (w) {
    case SeriesIntegral::I0: return integral_xiy(h, 0, q).value;
    case SeriesIntegral::I2: return integral_xiy(h, 2, q).value;
    case SeriesIntegral::I4p: return integral_xi_over_y(h, 4, q).value;
  }
  return 0.0;
}

/// Value at h = 0: subtract the exact log terms, then fit c + beta h through h = 1e-3, 1e-4.
double loop_limit(SeriesIntegral w, const QuadratureConfig& q) {
  const auto logs = log_coefficients(w);
  auto analytic = [&](double h) {
    double v = quad_value(w, h, q);
    for (std::size_t n = 1; n < logs.size(); ++n) v -= to_double(logs[n]) * std::pow(h, n) * std::log(h);
    return v;
  };
  const double h1 = 1e-3, h2 = 1e-4;
  const double a1 = analytic(h1), a2 = analytic(h2);
  return a2 - (a1 - a2) / (h1 - h2) * h2;
}

}  // namespace

int main() {
  criterion(1, "Picard-Fuchs residuals", [] {
    double worst = 0.0, at = 0.0;
    for (double h : make_grid({1e-4, 3.0}, 50, GridSpacing::Logarithmic)) {
      const double r = pf_residuals(integral_triple(h, {1e-14, 1e-13, 200})).max();
      if (r > worst) worst = r, at = h;
    }
    return Outcome{worst < 1e-7, fmt("max relative residual %.3g at h=%.3g (tol 1e-7)", worst, at)};
  });

  criterion(2, "Loop constants", [] {
    double worst = 0.0;
    std::string d;
    for (SeriesIntegral w : kSeriesIntegrals) {
      const double c = loop_limit(w, kTight);
      const double exact = to_double(loop_constant(w));
      const double rel = std::abs(c - exact) / exact;
      worst = std::max(worst, rel);
      d += fmt("%s(0+)=%.10f ", std::string(to_string(w)).c_str(), c);
    }
    d += fmt("kappa=%.9f max rel err %.2g (tol 1e-5)", measure_contour_normalization(), worst);
    return Outcome{worst < 1e-5, d};
  });

  criterion(3, "Log coefficients", [] {
    const LogFit f0 = fit_log_coefficients(SeriesIntegral::I0);
    const double expect[] = {-1.0, 3.0 / 8.0, -35.0 / 64.0};
    double worst = 0.0;
    for (int n = 1; n <= 3; ++n) worst = std::max(worst, std::abs(f0.log_coeffs[n] / expect[n - 1] - 1.0));
    std::vector<LogFit> fits{f0, fit_log_coefficients(SeriesIntegral::I2), fit_log_coefficients(SeriesIntegral::I4p)};
    const FittedConstants fc = fit_constants(sample_triples({0.01, 0.15}, 24, kTight));
    std::string mism;
    for (const auto& chk : audit_printed_coefficients(fc, fits)) {
      if (chk.agrees) continue;
      mism += fmt("; %s %s printed %.6g, exact %.6g, quadrature %.6g", std::string(to_string(chk.which)).c_str(),
                  chk.term.c_str(), chk.printed, chk.exact, chk.quadrature);
    }
    return Outcome{worst < 1e-3, fmt("I0 fitted (%.6f, %.6f, %.6f) max rel err %.2g (tol 1e-3); reported mismatches",
                                     f0.log_coeffs[1], f0.log_coeffs[2], f0.log_coeffs[3], worst) +
                                     (mism.empty() ? std::string(": none") : mism)};
  });

  criterion(4, "5 I2 - I4' vs 16h + 4h^2 ln h", [] {
    double worst = 0.0, at = 0.0, last_pass = 0.0;
    for (double h : make_grid({1e-3, 5e-2}, 40, GridSpacing::Logarithmic)) {
      const double lhs = 5.0 * integral_xiy(h, 2, kTight).value - integral_xi_over_y(h, 4, kTight).value;
      const double rhs = 16.0 * h + 4.0 * h * h * std::log(h);
      const double rel = std::abs(lhs - rhs) / std::abs(rhs);
      if (rel > worst) worst = rel, at = h;
      if (rel < 5e-3) last_pass = h;
    }
    return Outcome{worst < 5e-3, fmt("max relative gap %.3g at h=%.3g (tol 5e-3); within tolerance up to h=%.3g; "
                                     "the omitted h^2 term is (16 - 4 a1) h^2",
                                     worst, at, last_pass)};
  });

  criterion(5, "Center variety", [] {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    const auto hs = make_grid({0.01, 0.5}, 12, GridSpacing::Logarithmic);
    double worst[2] = {0.0, 0.0};
    int bad[2] = {0, 0}, failed[2] = {0, 0};
    double min_bad_ratio = INFINITY;  // smallest h / |lambda3| among violations
    for (int i = 0; i < 20; ++i) {
      const int branch = i % 2;  // 0: x^2 term only, 1: x y term only
      const double p = u(gen);
      const PerturbationParams lam{0.0, branch == 0 ? p : 0.0, branch == 1 ? p : 0.0, 0.0};
      for (double h : hs) {
        double d = INFINITY;
        try {
          d = std::abs(displacement(h, lam));
        } catch (const Error&) {
          ++failed[branch];
        }
        if (std::isfinite(d)) worst[branch] = std::max(worst[branch], d);
        if (!(d < 1e-8)) {
          ++bad[branch];
          min_bad_ratio = std::min(min_bad_ratio, h / std::abs(p));
        }
      }
    }
    const bool pass = bad[0] + bad[1] == 0;
    std::string d = fmt("x^2 branch: max |d| %.2g, %d/120 points above 1e-8; x y branch: max |d| %.2g on returns, "
                        "%d/120 points above 1e-8 (%d without return) (tol 1e-8)",
                        worst[0], bad[0], worst[1], bad[1], failed[1]);
    if (!pass) d += fmt("; violations need h/|lambda3| <= %.3g: the x y term splits the lobe loops", min_bad_ratio);
    return Outcome{pass, d};
  });

  criterion(6, "First-order convergence", [] {
    const double s = measure_contour_normalization();
    const std::vector<double> eps{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    const auto rows = melnikov_convergence(ArcSpec::linear(1, 0, 0, 0), {0.1, 0.2, 0.4}, eps, {}, s);
    bool ok = true;
    std::string d = fmt("s=%.8f;", s);
    for (double h : {0.1, 0.2, 0.4}) {
      double prev = INFINITY, final_err = 0.0;
      bool monotone = true;
      for (const auto& r : rows) {
        if (r.h != h) continue;
        const double err = std::abs(r.ratio - 1.0);
        monotone = monotone && err < prev;
        prev = err;
        final_err = err;
      }
      ok = ok && monotone && final_err < 0.05;
      d += fmt(" h=%.1f err %.2g at 1e-4%s;", h, final_err, monotone ? " decreasing" : " NOT decreasing");
    }
    return Outcome{ok, d + " (tol 5%)"};
  });

  criterion(7, "Second-order cross term", [] {
    const double s = measure_contour_normalization();
    const auto rows = melnikov_convergence(ArcSpec::linear(0, 1, 1, 0), {0.1, 0.2, 0.4}, {3e-3}, {}, s);
    double worst = 0.0;
    std::string d;
    for (const auto& r : rows) {
      worst = std::max(worst, std::abs(r.ratio - 1.0));
      d += fmt("h=%.1f ratio %.4f; ", r.h, r.ratio);
    }
    return Outcome{worst < 0.1 && rows.front().k == 2, d + fmt("k=%d (tol 10%%)", rows.front().k)};
  });

  criterion(8, "Planted limit cycle", [] {
    const double eps = 1e-3;
    const double r = integral_xiy(0.2, 0, kTight).value / integral_xiy(0.2, 2, kTight).value;
    const QuadratureBackend q{kTight};
    const auto m1f = [&](double h) { return m1(h, 1.0, -r, q); };
    const double dm = (m1f(0.2 + 1e-5) - m1f(0.2 - 1e-5)) / 2e-5;
    const ZeroCount z = count_zeros(m1f, {1e-3, 0.5}, 400, 1e-12);
    LimitCycleOptions opt;
    opt.epsilon = eps;
    const LimitCycleScan scan = find_limit_cycles({eps, 0.0, 0.0, -eps * r}, {1e-3, 0.5}, 48, {}, opt);
    int near = 0;
    double h_star = NAN, reint = 0.0;
    for (const auto& rec : scan.records) {
      reint = std::max(reint, std::abs(return_map(rec.h_star, {eps, 0.0, 0.0, -eps * r}).h_out - rec.h_star));
      if (std::abs(rec.h_star - 0.2) < 0.02) ++near, h_star = rec.h_star;
    }
    const bool simple = std::abs(m1f(0.2)) < 1e-12 && std::abs(dm) > 1e-3;
    const bool ok = simple && near == 1 && static_cast<int>(scan.records.size()) == z.count &&
                    reint < 2 * opt.refine_tol && scan.failures.empty();
    std::string others;
    for (const auto& rec : scan.records) {
      if (std::abs(rec.h_star - 0.2) >= 0.02) others += fmt(" %.5f", rec.h_star);
    }
    return Outcome{ok, fmt("M1'(0.2)=%.3g; %d record within 0.02 of 0.2 (h*=%.8f); %zu records total, M1 has %d zeros "
                           "on [1e-3, 0.5]; other records:%s; re-integration %.2g",
                           dm, near, h_star, scan.records.size(), z.count, others.empty() ? " none" : others.c_str(),
                           reint)};
  });

  criterion(9, "Cyclicity sweep", [] {
    SweepOptions opt;
    opt.seed = 20261014;
    opt.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool ok = true;
    std::string d;
    for (ArcFamily f : {ArcFamily::M1Nonzero, ArcFamily::M1Zero}) {
      const SweepReport rep = cyclicity_sweep(f, 1e-3, {1e-3, 0.2}, 200, {}, opt);
      ok = ok && rep.max_count <= rep.bound && rep.confirmed_anomalies == 0;
      std::string hist;
      for (const auto& [c, n] : rep.histogram) hist += fmt(" %d:%d", c, n);
      d += fmt("%s max %d (bound %d) histogram%s anomalies %d confirmed %d failed samples %d; ",
               std::string(to_string(f)).c_str(), rep.max_count, rep.bound, hist.c_str(), rep.anomalies,
               rep.confirmed_anomalies, rep.failed_samples);
    }
    return Outcome{ok, d + "200 arcs per class"};
  });

  criterion(10, "Leading-coefficient implications", [] {
    const FittedConstants fc = fit_constants(sample_triples({0.01, 0.15}, 24, kTight));
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked1 = 0, checked2 = 0, violations = 0;
    for (int i = 0; i < 100; ++i) {
      MelnikovSpec s;
      if (i % 2 == 0) {
        const double l1 = u(gen);
        s = MelnikovSpec::first_order(l1, -1.25 * l1);
      } else {
        const int k = 2 + i % 3;
        const double cross = u(gen);
        s = MelnikovSpec::with_cross(k, 0.0, -5.0 * cross, cross);
      }
      const LeadingCoeffs lc = leading_coeffs(s, fc);
      const double scale = std::max({std::abs(s.lam1k), std::abs(s.lam4k), std::abs(s.k == 1 ? 0.0 : s.cross())});
      if (std::abs(lc.c0) > 1e-14 * scale) continue;  // implication is vacuous
      if (s.k == 1) {
        ++checked1;
        violations += lc.c1 == 0.0;
      } else if (lc.c1 == 0.0) {
        ++checked2;
        violations += std::abs(lc.c2) <= 1e-12 * scale;
      }
    }
    return Outcome{violations == 0 && checked1 + checked2 == 100,
                   fmt("%d k=1 specs with c0=0 (c1 != 0 required), %d k>=2 specs with c0=c1=0 (c2 != 0 required), "
                       "%d violations",
                       checked1, checked2, violations)};
  });

  criterion(11, "lambda1/lambda4 relation", [] {
    auto relation = [](const QuadratureConfig& q) {
      return loop_limit(SeriesIntegral::I2, q) / loop_limit(SeriesIntegral::I0, q);
    };
    const double r1 = relation(kTight);
    const double r2 = relation({1e-14, 1e-13, 300});
    return Outcome{std::abs(r1 - r2) < 1e-6,
                   fmt("c0=0 gives lambda1 + %.9f lambda4 = 0, i.e. %.6f lambda1 + 4 lambda4 = 0; rerun differs by %.2g "
                       "(tol 1e-6); printed form lambda1 + 4 lambda4 = 0",
                       r1, 4.0 / r1, std::abs(r1 - r2))};
  });

  std::printf("%d of 11 criteria passed\n", 11 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
