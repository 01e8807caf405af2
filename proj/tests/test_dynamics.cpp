#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "eightloop/dynamics.hpp"
#include "eightloop/sweep.hpp"

using namespace eightloop;

namespace {

// lambda = eps (1, 0, 0, -r) with M1 = eps (I0 - r I2) vanishing at h_star.
PerturbationParams planted(double h_star, double eps) {
  const double r = integral_xiy(h_star, 0).value / integral_xiy(h_star, 2).value;
  return {eps, 0.0, 0.0, -eps * r};
}

PhasePoint on_oval(double h) { return {turning_point(h), 0.0}; }

}  // namespace

TEST(Integrate, EnergyConservedOverOnePeriod) {
  const Trajectory tr = integrate(on_oval(1.0), {}, 6.0);
  for (int i = 0; i <= 2000; ++i) EXPECT_NEAR(energy(tr.at(6.0 * i / 2000)), 1.0, 1e-9);
}

TEST(Integrate, CenterStaysPut) {
  const Trajectory tr = integrate({1.0, 0.0}, {}, 50.0);
  const PhasePoint p = tr.at(50.0);
  EXPECT_NEAR(p.x, 1.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
}

TEST(Integrate, DampingSignRaisesEnergy) {
  const Trajectory tr = integrate({2.0, 0.0}, {0.01, 0.0, 0.0, 0.0}, 10.0);
  double prev = energy(tr.at(0.0));
  for (int i = 1; i <= 1000; ++i) {
    const double e = energy(tr.at(10.0 * i / 1000));
    EXPECT_GE(e, prev - 1e-11);
    prev = e;
  }
  EXPECT_GT(prev - energy({2.0, 0.0}), 0.01);
}

TEST(Integrate, EnergyRateMatchesDenseOutput) {
  const PerturbationParams lam{0.05, -0.1, 0.2, 0.03};
  const Trajectory tr = integrate({1.8, 0.3}, lam, 5.0);
  const double d = 1e-4;
  double worst = 0.0;
  for (double t = 0.1; t < 4.9; t += 0.05) {
    const double fd = (energy(tr.at(t + d)) - energy(tr.at(t - d))) / (2 * d);
    worst = std::max(worst, std::abs(fd - energy_rate(tr.at(t), lam)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Integrate, TimeReversal) {
  // (x, y, t) -> (x, -y, -t) maps unperturbed orbits to orbits.
  const PhasePoint p0{1.7, 0.4};
  const PhasePoint p1 = integrate(p0, {}, 7.3).at(7.3);
  const PhasePoint back = integrate({p1.x, -p1.y}, {}, 7.3).at(7.3);
  EXPECT_NEAR(back.x, p0.x, 1e-8);
  EXPECT_NEAR(-back.y, p0.y, 1e-8);
}

TEST(Integrate, Errors) {
  IntegratorConfig cfg;
  cfg.max_time = 10.0;
  try {
    (void)integrate({2.0, 0.0}, {}, 11.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeCap);
  }
  cfg.max_steps = 5;
  try {
    (void)integrate({2.0, 0.0}, {}, 10.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepFailure);
  }
  EXPECT_THROW((void)integrate({std::nan(""), 0.0}, {}, 1.0), Error);
  EXPECT_THROW((void)integrate({2.0, 0.0}, {}, 1.0).at(1.5), Error);
}

TEST(ReturnMap, IdentityForHamiltonianFlows) {
  for (double h : {1e-3, 0.01, 0.2, 0.5, 2.0}) {
    const ReturnMapSample s = return_map(h, {});
    EXPECT_NEAR(s.h_out, h, 1e-9) << h;
    EXPECT_GT(s.flow_time, 0.0);
    EXPECT_EQ(s.crossings, 1);  // the upward pass through y = 0 at x < 0
    EXPECT_NEAR(s.landing.x, turning_point(h), 1e-6);
    // x^2 term is the gradient part of a Hamiltonian: center.
    EXPECT_NEAR(return_map(h, {0.0, 0.1, 0.0, 0.0}).h_out, h, 1e-9) << h;
  }
}

TEST(ReturnMap, FirstOrderScale) {
  const double eps = 1e-4;
  const double d = displacement(0.2, {eps, 0.0, 0.0, 0.0});
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(d / eps / (kContourNormalization * integral_xiy(0.2, 0).value), 1.0, 0.02);
}

TEST(ReturnMap, Errors) {
  EXPECT_THROW((void)return_map(0.0, {}), Error);
  EXPECT_THROW((void)return_map(1e-4, {}), Error);
  try {
    (void)return_map(1.0, {2.0, 0.0, 0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EscapedRegion);
  }
  // Energy gained on the right half is shed on the left: the orbit is captured by the left lobe.
  try {
    (void)return_map(0.01, {0.0, 0.0, 0.2, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeCap);
  }
}

TEST(Displacement, CenterVarietyHamiltonianBranch) {
  for (double l2 : {0.2, -0.15, 0.05}) {
    for (double h : {0.01, 0.05, 0.2, 0.5}) EXPECT_LT(std::abs(displacement(h, {0, l2, 0, 0})), 1e-8) << h;
  }
}

// The x y term is reversible under (x, y, t) -> (-x, y, -t): every orbit that
// crosses x = 0 twice is closed. The term also splits each lobe's homoclinic
// loop by O(lambda3), so ovals with h below the splitting get captured.
TEST(Displacement, CenterVarietyReversibleBranch) {
  for (double l3 : {0.2, -0.2, 0.01, -0.01}) {
    for (double h : {0.2, 0.5}) EXPECT_LT(std::abs(displacement(h, {0, 0, l3, 0})), 1e-8) << h;
  }
  for (double l3 : {0.01, -0.01}) EXPECT_LT(std::abs(displacement(0.01, {0, 0, l3, 0})), 1e-8);
  EXPECT_LT(displacement(0.01, {0, 0, -0.2, 0}), -0.1);
  EXPECT_THROW((void)displacement(0.01, {0, 0, 0.2, 0}), Error);
}

TEST(FindLimitCycles, NoneWithoutPerturbation) {
  const LimitCycleScan s = find_limit_cycles({}, {1e-3, 0.5}, 24);
  EXPECT_TRUE(s.records.empty());
  EXPECT_TRUE(s.failures.empty());
}

TEST(FindLimitCycles, PlantedCycle) {
  const double eps = 1e-3;
  const PerturbationParams lam = planted(0.2, eps);
  LimitCycleOptions opt;
  opt.epsilon = eps;
  const LimitCycleScan s = find_limit_cycles(lam, {0.05, 0.5}, 32, {}, opt);
  ASSERT_EQ(s.records.size(), 1u);
  const LimitCycleRecord& r = s.records[0];
  EXPECT_LT(std::abs(r.h_star - 0.2), 0.02);
  EXPECT_LE(r.bracket.second - r.bracket.first, opt.refine_tol);
  EXPECT_EQ(r.epsilon, eps);
  // M1'(0.2) < 0 for this sign of eps: an attracting cycle.
  EXPECT_EQ(r.stability, -1);
  const ReturnMapSample again = return_map(r.h_star, lam);
  EXPECT_LT(std::abs(again.h_out - r.h_star), 2 * opt.refine_tol);
}

TEST(FindLimitCycles, NoneNearTheLoopWhenM1DoesNotVanishThere) {
  const LimitCycleScan s = find_limit_cycles({1e-3, 0, 0, 0}, {1e-3, 0.5}, 32);
  for (const auto& r : s.records) EXPECT_GE(r.h_star, 0.05);
  EXPECT_TRUE(s.records.empty());
}

TEST(FindLimitCycles, FailuresAreRecordedNotFatal) {
  IntegratorConfig cfg;
  cfg.max_time = 30.0;
  const LimitCycleScan s = find_limit_cycles({-0.05, 0, 0, 0}, {1e-3, 0.5}, 16, cfg);
  EXPECT_FALSE(s.failures.empty());
  for (const auto& f : s.failures) EXPECT_EQ(f.code, ErrorCode::TimeCap);
  EXPECT_THROW((void)find_limit_cycles({}, {1e-4, 0.5}, 16), Error);
}

TEST(ArcSpec, EvaluationAndOrders) {
  ArcSpec a;
  a.coeff_table = {std::vector<double>{0.0, 2.0}, {1.0}, {1.0, -1.0}, {0.0, 0.5}};
  const PerturbationParams l = a.at(0.1);
  EXPECT_DOUBLE_EQ(l.lambda1, 0.02);
  EXPECT_DOUBLE_EQ(l.lambda2, 0.1);
  EXPECT_NEAR(l.lambda3, 0.1 - 0.01, 1e-16);
  EXPECT_DOUBLE_EQ(l.lambda4, 0.005);
  EXPECT_TRUE(a.at(0.0).is_zero());
  EXPECT_TRUE(a.m1_vanishes());
  EXPECT_EQ(a.leading_order(), 2);
  const MelnikovSpec s = a.melnikov_spec(2);
  EXPECT_DOUBLE_EQ(s.lam1k, 2.0);
  EXPECT_DOUBLE_EQ(s.lam4k, 0.5);
  EXPECT_NEAR(s.cross(), 1.0 / 3.0, 1e-16);
  EXPECT_FALSE(ArcSpec::linear(0, 1, 0, 0).leading_order().has_value());
  EXPECT_EQ(ArcSpec::linear(0, 1, 1, 0).leading_order(), 2);
}

TEST(MelnikovConvergence, FirstOrderArc) {
  const auto rows = melnikov_convergence(ArcSpec::linear(1, 0, 0, 0), {0.1, 0.2, 0.4}, {1e-2, 1e-3, 1e-4});
  ASSERT_EQ(rows.size(), 9u);
  for (double h : {0.1, 0.2, 0.4}) {
    double prev = 1e300;
    for (const auto& r : rows) {
      if (r.h != h) continue;
      EXPECT_EQ(r.k, 1);
      const double err = std::abs(r.ratio - 1.0);
      EXPECT_LT(err, prev);
      prev = err;
    }
    EXPECT_LT(prev, 0.05);
  }
}

TEST(MelnikovConvergence, CrossTermArc) {
  const auto rows = melnikov_convergence(ArcSpec::linear(0, 1, 1, 0), {0.1, 0.2, 0.4}, {3e-3});
  for (const auto& r : rows) {
    EXPECT_EQ(r.k, 2);
    EXPECT_NEAR(r.mk, integral_xi_over_y(r.h, 4).value / 3.0, 1e-12);
    EXPECT_NEAR(r.ratio, 1.0, 0.1) << r.h;
  }
}

TEST(MelnikovConvergence, CenterArc) {
  for (int k : {1, 2}) {
    const auto rows = melnikov_convergence(ArcSpec::linear(0, 1, 0, 0), {0.1, 0.3}, {1e-2, 1e-3}, {}, 2.0, k);
    for (const auto& r : rows) {
      EXPECT_EQ(r.mk, 0.0);
      EXPECT_LT(std::abs(r.scaled_displacement) * std::pow(r.eps, k), 1e-9);
    }
  }
}

TEST(CounterRng, Deterministic) {
  CounterRng a(42, 7), b(42, 7), c(42, 8);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    seen.insert(va);
  }
  EXPECT_EQ(seen.size(), 100u);
  CounterRng u(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform(-1.0, 1.0);
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(SampleArc, Families) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    const ArcSpec n = sample_arc(ArcFamily::M1Nonzero, 3, i);
    EXPECT_FALSE(n.m1_vanishes());
    EXPECT_EQ(n.leading_order(), 1);
    if (i % 2 == 1) {
      EXPECT_LT(std::abs(n.coeff(0, 1) * 4.0 / 3.0 + n.coeff(3, 1) * 16.0 / 15.0), 0.02);
    }
    const ArcSpec z = sample_arc(ArcFamily::M1Zero, 3, i);
    EXPECT_TRUE(z.m1_vanishes());
    EXPECT_EQ(z.leading_order(), 2);
    EXPECT_TRUE(sample_arc(ArcFamily::Zero, 3, i).at(0.1).is_zero());
  }
  EXPECT_EQ(sample_arc(ArcFamily::M1Zero, 9, 4).coeff_table, sample_arc(ArcFamily::M1Zero, 9, 4).coeff_table);
}

TEST(CyclicitySweep, IndependentOfThreadCount) {
  SweepOptions one;
  one.seed = 5;
  one.grid_n = 24;
  SweepOptions three = one;
  three.threads = 3;
  const SweepReport a = cyclicity_sweep(ArcFamily::M1Nonzero, 1e-3, {1e-3, 0.2}, 12, {}, one);
  const SweepReport b = cyclicity_sweep(ArcFamily::M1Nonzero, 1e-3, {1e-3, 0.2}, 12, {}, three);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].count, b.samples[i].count);
    ASSERT_EQ(a.samples[i].cycles.size(), b.samples[i].cycles.size());
    for (std::size_t j = 0; j < a.samples[i].cycles.size(); ++j) {
      EXPECT_EQ(a.samples[i].cycles[j].h_star, b.samples[i].cycles[j].h_star);
    }
  }
  EXPECT_EQ(a.histogram, b.histogram);
}

TEST(CyclicitySweep, ZeroFamilyHasNoCycles) {
  const SweepReport r = cyclicity_sweep(ArcFamily::Zero, 1e-3, {1e-3, 0.2}, 6);
  EXPECT_EQ(r.max_count, 0);
  EXPECT_EQ(r.histogram.at(0), 6);
  EXPECT_EQ(r.bound, 5);
  EXPECT_EQ(r.anomalies, 0);
}
