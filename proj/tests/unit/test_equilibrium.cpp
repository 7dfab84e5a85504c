#include <gtest/gtest.h>

#include <cmath>

#include <lendsim/equilibrium.hpp>
#include <lendsim/simulation.hpp>

using namespace lendsim;

namespace {

MarketRegime regime(double alpha, double sigma) {
  MarketRegime m;
  m.step = {0.0, sigma};
  m.r_ext_lend = 0.003;
  m.r_ext_borrow = 0.05;
  m.eta_lend = 20;
  m.eta_borrow = 30;
  m.alpha = alpha;
  m.duration = 3000;
  return m;
}

Scenario pinned(const MarketRegime& m, bool accrue) {
  Scenario s;
  s.horizon = m.duration;
  s.seed = 5;
  s.initial.supply = 1e9;
  s.initial.debt = 5e8;
  s.params = {0.0, 0.6, 0.7, 0.0};
  s.pool_options.accrue_interest = accrue;
  s.regimes = {m};
  s.controller.kind = ControllerKind::oracle;
  return s;
}

} // namespace

TEST(EquilibriumRate, RiskFreeFinancing) {
  EXPECT_NEAR(equilibrium_rate(regime(1.0, 0.0), 0.5), 0.05, 1e-6);
  EXPECT_NEAR(equilibrium_rate(regime(1.0, 1e-9), 0.5), 0.05, 1e-6);
}

TEST(EquilibriumRate, RiskFreeLeverageIsDegenerate) {
  const MarketRegime m = regime(0.0, 0.0);
  const double r = equilibrium_rate(m, 0.5);
  EXPECT_NEAR(r, 0.0, 1e-12);
  EXPECT_FALSE(nontrivial(r));
  EXPECT_THROW(require_nontrivial(r), DomainError);
  EXPECT_TRUE(equilibrium_utilization(m, 0.5, r).degenerate);
}

TEST(EquilibriumUtilization, ClosedFormCases) {
  MarketRegime m = regime(1.0, 0.0);
  m.r_ext_lend = 0.01;
  const auto at_one = equilibrium_utilization(m, 0.5, 0.01);
  EXPECT_EQ(at_one.u_star, 1.0);
  EXPECT_FALSE(at_one.degenerate);
  EXPECT_NEAR(equilibrium_utilization(m, 0.5, 0.02).u_star, 0.5, 1e-15);
  EXPECT_TRUE(equilibrium_utilization(m, 0.5, 0.005).degenerate);
}

TEST(Equilibrium, ZeroUtilityCertification) {
  int checked = 0;
  for (double alpha : {0.2, 0.6, 1.0})
    for (double sigma : {0.01, 0.05, 0.1}) {
      MarketRegime m = regime(alpha, sigma);
      m.r_ext_borrow = 0.2;
      const ProtocolParams q0{0.0, 0.5, 0.9, 0.0};
      const auto eq = equilibrium_point(m, q0);
      if (eq.degenerate) continue;
      const ProtocolParams q{eq.r_star, 0.5, 0.9, 0.0};
      const RiskTerms k = risk_terms(q, m.step);
      EXPECT_NEAR(borrower_utility(q.rate, 0.0, k, m), 0.0, 1e-9);
      EXPECT_NEAR(lender_utility(eq.u_star, q.rate, k, m), 0.0, 1e-9);
      ++checked;
    }
  EXPECT_GE(checked, 4);
}

TEST(Equilibrium, Monotonicity) {
  const double c = 0.7;
  for (double alpha : {0.3, 0.8}) {
    MarketRegime a = regime(alpha, 0.05), b = a;
    b.r_ext_borrow += 0.01;
    EXPECT_NEAR(equilibrium_rate(b, c) - equilibrium_rate(a, c), alpha * 0.01, 1e-12);
  }
  const MarketRegime m = regime(1.0, 0.05);
  double prev = 2.0;
  for (double r = 0.01; r < 0.05; r += 0.002) {
    const double u = equilibrium_utilization(m, c, r).u_star;
    EXPECT_LE(u, prev);
    prev = u;
  }
}

TEST(Equilibrium, NoiselessPoolAtEquilibriumRateHasNoBorrowerFlow) {
  const auto log = run_scenario(pinned(regime(0.6, 0.03), true));
  for (const auto& r : log) ASSERT_LT(std::abs(r.dB_rel), 1e-9) << "slot " << r.t;
}

TEST(Equilibrium, NoiselessPoolConvergesToEquilibriumUtilization) {
  const Scenario s = pinned(regime(0.6, 0.03), false);
  const auto log = run_scenario(s);
  const auto eq = equilibrium_point(s.regimes[0], s.params);
  ASSERT_FALSE(eq.degenerate);
  EXPECT_NEAR(log[1999].U, eq.u_star, 1e-3);
  EXPECT_NEAR(log.back().U, eq.u_star, 1e-6);
}

TEST(Equilibrium, LoggedEquilibriumMatchesModule) {
  const Scenario s = pinned(regime(0.6, 0.03), false);
  const auto log = run_scenario(s);
  const auto eq = equilibrium_point(s.regimes[0], s.params);
  EXPECT_EQ(log[10].r_star, eq.r_star);
  EXPECT_EQ(log[10].u_star, eq.u_star);
  EXPECT_EQ(log[10].r, eq.r_star);
}
