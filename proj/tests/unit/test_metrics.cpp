#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <lendsim/experiments.hpp>
#include <lendsim/metrics.hpp>

using namespace lendsim;

namespace {

std::vector<TimeslotRecord> flat_log(const std::vector<double>& u) {
  std::vector<TimeslotRecord> log;
  for (std::size_t i = 0; i < u.size(); ++i) {
    TimeslotRecord r;
    r.t = static_cast<std::int64_t>(i);
    r.U = u[i];
    log.push_back(r);
  }
  return log;
}

EquilibriumSlotSet all_slots(std::size_t n) {
  EquilibriumSlotSet te;
  for (std::size_t i = 0; i < n; ++i) te.slots.push_back(static_cast<std::int64_t>(i));
  return te;
}

} // namespace

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(quantile(v, 0.0), 1.0);
  EXPECT_EQ(quantile(v, 1.0), 4.0);
  EXPECT_EQ(median(v), 2.5);
  EXPECT_NEAR(quantile(v, 0.9), 3.7, 1e-15);
  EXPECT_THROW(quantile({}, 0.5), DomainError);
}

TEST(MaxDrawdown, HandExample) {
  auto log = flat_log({0, 0, 0, 0, 0});
  const double b[] = {10, 12, 6, 11, 3};
  for (std::size_t i = 0; i < log.size(); ++i) log[i].B = b[i];
  EXPECT_NEAR(max_drawdown(log), 0.75, 1e-15);
  for (auto& r : log) r.B = 5;
  EXPECT_EQ(max_drawdown(log), 0.0);
}

TEST(FittedSlope, ExactLine) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, -1, -3, -5};
  EXPECT_NEAR(fitted_slope(x, y), -2.0, 1e-15);
  EXPECT_THROW(fitted_slope(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
}

TEST(TerminalRateErrors, MedianOfEachRegimeTail) {
  auto log = flat_log(std::vector<double>(8, 0.5));
  const double err[] = {9, 9, 1, 3, 9, 2, 4, 6};
  for (std::size_t i = 0; i < log.size(); ++i) {
    log[i].regime = i < 4 ? 0 : 1;
    log[i].r_star = 0.1;
    log[i].r = 0.1 + err[i];
  }
  const auto e = terminal_rate_errors(log, 3);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], 3.0, 1e-12);
  EXPECT_NEAR(e[1], 4.0, 1e-12);
}

TEST(EquilibriumSlots, DwellAndThreshold) {
  auto log = flat_log(std::vector<double>(10, 0.5));
  const double db[] = {0.5, 0.01, 0.01, 0.01, 0.5, 0.01, 0.01, 0.01, 0.01, 0.01};
  for (std::size_t i = 0; i < log.size(); ++i) log[i].dB_rel = db[i];
  const auto te = detect_equilibrium_slots(log, 0.1, 3);
  EXPECT_EQ(te.slots, (std::vector<std::int64_t>{3, 7, 8, 9}));
  EXPECT_TRUE(detect_equilibrium_slots(log, 0.1, 3, 0.01).slots.empty());
  EXPECT_EQ(detect_equilibrium_slots(log, 0.1, 3).slots, te.slots);
}

TEST(OptimalityIndex, PerfectScoreAndArithmetic) {
  const auto perfect = flat_log(std::vector<double>(6, 0.5));
  EXPECT_EQ(*optimality_index(perfect, all_slots(6), 0.5, 0.0), 0.0);
  const auto miss = flat_log({0.6, 0.4, 0.6, 0.4});
  EXPECT_NEAR(*optimality_index(miss, all_slots(4), 0.5, 0.0), -0.01, 1e-15);
}

TEST(OptimalityIndex, RiskPenalty) {
  auto log = flat_log({0.5, 0.5});
  for (auto& r : log) {
    r.expected_default = 0.02;
    r.expected_liquidation = 0.001;
  }
  EXPECT_NEAR(*optimality_index(log, all_slots(2), 0.5, 2.0), -2.0 * (0.5 * 0.02 + 0.001), 1e-15);
}

TEST(OptimalityIndex, EmptyEquilibriumSetIsNotAScore) {
  const auto log = flat_log({0.5});
  EXPECT_FALSE(optimality_index(log, EquilibriumSlotSet{}, 0.5, 0.0).has_value());
}

TEST(AdversarialSusceptibility, ZeroWithoutAdversary) {
  RateExperimentSetup x;
  x.regimes = 4;
  Scenario s = rate_scenario(1, ControllerKind::lse, x);
  s.adversary = {0.0, 0.0, AdversaryMode::flip_sign};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto as = adversarial_susceptibility(s, seeds);
  for (double g : as.per_seed) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(as.mean, 0.0);
}

TEST(AdversarialSusceptibility, ExactExclusionMatchesInformedFit) {
  // Gross corruption, and a robust fit told exactly how many samples are corrupt:
  // the blind fit equals the informed one, so the per-fit rate gap vanishes.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Engine g = make_stream(seed, Stream::scenario), a = make_stream(seed, Stream::adversary);
    std::vector<Sample> all, clean;
    for (int i = 0; i < 200; ++i) {
      const double r = 0.01 + 0.19 * uniform01(g);
      Sample s{r, 50 * (0.08 - r) + 0.05 * standard_normal(g), uniform01(a) < 0.3};
      if (s.flagged)
        s.y += 100.0;
      else
        clean.push_back(s);
      all.push_back(s);
    }
    TorrentOptions opt;
    opt.keep = clean.size();
    const auto blind = torrent_gd_fit(all, opt);
    const auto informed = ols_fit(clean);
    EXPECT_NEAR(*blind.root(), *informed.root(), 1e-9) << seed;
    EXPECT_GT(std::abs(*ols_fit(all).root() - *informed.root()), 1e-3);
  }
}

TEST(ConvergenceProfile, OracleControllerHasZeroProfile) {
  RateExperimentSetup x;
  x.regimes = 5;
  const auto log = run_scenario(rate_scenario(4, ControllerKind::oracle, x));
  const auto p = convergence_profile(log, true);
  ASSERT_EQ(p.errors.size(), 5u);
  for (const auto& e : p.errors)
    for (double v : e) ASSERT_EQ(v, 0.0);
}

TEST(ConvergenceProfile, LseEnvelopeShrinksWithTime) {
  RateExperimentSetup x;
  x.regimes = 5;
  x.regime_length = 500;
  std::vector<ConvergenceProfile> profiles;
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    profiles.push_back(convergence_profile(run_scenario(rate_scenario(seed, ControllerKind::lse, x))));
  const auto env = quantile_envelope(profiles, 0.1);
  ASSERT_GT(env.size(), 400u);
  EXPECT_LT(env[400], env[50]);
}

TEST(OptimalityIndex, ReplanningBeatsStaleCollateral) {
  // Same seed, same post-step regime; only the planner differs.
  PlannerExperimentSetup x;
  const Scenario on = planner_scenario(1, x);
  Scenario off = on;
  off.planner_enabled = false;
  const auto a = run_scenario(on), b = run_scenario(off);
  const std::int64_t from = x.step_at + 1500;
  auto tail = [&](const std::vector<TimeslotRecord>& log) {
    const auto te = detect_equilibrium_slots(log, zetas(on), on.metrics.dwell, on.metrics.tol_mult);
    EquilibriumSlotSet late{{}, te.dwell, te.tol_mult};
    for (auto t : te.slots)
      if (t >= from) late.slots.push_back(t);
    return optimality_index(log, late, on.planner.u_opt, on.planner.gamma);
  };
  const auto oi_on = tail(a), oi_off = tail(b);
  ASSERT_TRUE(oi_on && oi_off);
  EXPECT_GT(*oi_on, *oi_off);
}
