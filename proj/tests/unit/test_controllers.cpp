#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <lendsim/controllers.hpp>
#include <lendsim/metrics.hpp>
#include <lendsim/simulation.hpp>

using namespace lendsim;

namespace {

/// Relative debt changes eta (r* - r) + zeta * noise at rates uniform on [lo, hi].
std::vector<Sample> synthetic(std::uint64_t seed, std::size_t n, double eta, double r_star, double zeta, double lo,
                              double hi, double flip_share = 0.0) {
  Engine g = make_stream(seed, Stream::scenario);
  Engine a = make_stream(seed, Stream::adversary);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = lo + (hi - lo) * uniform01(g);
    const bool bad = uniform01(a) < flip_share;
    const double drive = eta * (r_star - r);
    out.push_back({r, (bad ? -drive : drive) + zeta * standard_normal(g), bad});
  }
  return out;
}

} // namespace

TEST(OlsFit, HandSolvedTwoByTwo) {
  const std::vector<Sample> s{{0.02, 1.5}, {0.08, -1.5}};
  const auto e = ols_fit(s);
  EXPECT_NEAR(e.theta0, 2.5, 1e-13);
  EXPECT_NEAR(e.theta1, -50.0, 1e-12);
  EXPECT_NEAR(*e.root(), 0.05, 1e-15);
}

TEST(OlsFit, DuplicatedDataGivesSameFit) {
  const auto s = synthetic(1, 40, 30, 0.05, 0.1, 0.0, 0.1);
  auto d = s;
  d.insert(d.end(), s.begin(), s.end());
  const auto a = ols_fit(s), b = ols_fit(d);
  EXPECT_NEAR(a.theta0, b.theta0, 1e-12);
  EXPECT_NEAR(a.theta1, b.theta1, 1e-10);
}

TEST(OlsFit, ResidualsOrthogonalToDesign) {
  const auto s = synthetic(2, 300, 30, 0.05, 0.2, 0.0, 0.1);
  const auto e = ols_fit(s);
  double g0 = 0.0, g1 = 0.0;
  for (const auto& p : s) {
    const double r = p.y - e.theta0 - e.theta1 * p.x;
    g0 += r;
    g1 += r * p.x;
  }
  EXPECT_NEAR(g0, 0.0, 1e-8);
  EXPECT_NEAR(g1, 0.0, 1e-8);
}

TEST(OlsFit, SingularDesigns) {
  EXPECT_THROW(ols_fit(std::vector<Sample>{{0.1, 1.0}}), SingularDesign);
  EXPECT_THROW(ols_fit(std::vector<Sample>{{0.1, 1.0}, {0.1, 2.0}, {0.1, 0.5}}), SingularDesign);
  ThetaEstimate flat{1.0, 0.0};
  EXPECT_FALSE(flat.root().has_value());
}

TEST(OlsFit, CalibrationUnderNoise) {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto e = ols_fit(synthetic(seed, 500, 50, 0.1, 0.1, 0.01, 0.2));
    good += std::abs(*e.root() - 0.1) < 0.01;
  }
  EXPECT_GE(good, 95);
}

TEST(KnownSlope, UnbiasedRootAcrossSeeds) {
  const int seeds = 400;
  double sum = 0.0, sum2 = 0.0;
  for (int seed = 1; seed <= seeds; ++seed) {
    const double e = root_with_known_slope(synthetic(seed, 50, 50, 0.05, 0.1, 0.0, 0.1), -50.0) - 0.05;
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / seeds;
  const double se = std::sqrt((sum2 / seeds - mean * mean) / seeds);
  EXPECT_NEAR(mean, 0.0, 3.0 * se);
}

TEST(TorrentFit, FullActiveSetIsOls) {
  const auto s = synthetic(3, 200, 50, 0.08, 0.05, 0.01, 0.2);
  const auto o = ols_fit(s);
  const auto t = torrent_gd_fit(s, {.keep = 0});
  EXPECT_EQ(o.theta0, t.theta0);
  EXPECT_EQ(o.theta1, t.theta1);
  TorrentOptions gd;
  gd.shortcut_full = false;
  const auto g = torrent_gd_fit(s, gd);
  EXPECT_TRUE(g.converged);
  EXPECT_NEAR(g.theta0, o.theta0, 1e-8);
  EXPECT_NEAR(g.theta1, o.theta1, 1e-7);
}

TEST(TorrentFit, ExcludesGrossOutlier) {
  auto s = synthetic(4, 60, 50, 0.08, 0.0, 0.01, 0.2);
  s[17].y += 40.0;
  TorrentOptions opt;
  opt.keep = s.size() - 1;
  const auto t = torrent_gd_fit(s, opt);
  EXPECT_TRUE(t.converged);
  EXPECT_NEAR(t.theta1, -50.0, 1e-6);
  EXPECT_NEAR(*t.root(), 0.08, 1e-9);
  EXPECT_GT(std::abs(*ols_fit(s).root() - 0.08), 1e-3);
}

TEST(TorrentFit, BeatsOlsUnderFlipSignCorruption) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = synthetic(seed, 200, 50, 0.08, 0.05, 0.01, 0.2, 0.3);
    TorrentOptions opt;
    opt.keep = 130;
    wins += std::abs(*torrent_gd_fit(s, opt).root() - 0.08) < std::abs(*ols_fit(s).root() - 0.08);
  }
  EXPECT_GE(wins, 90);
}

TEST(LseController, QuietMarketSleepsAndResets) {
  LseConfig cfg;
  cfg.r_min = 0.0;
  cfg.r_max = 0.1;
  cfg.t_sleep = 2;
  LseController c(cfg, 0.03);
  c.step({0.02, 1.5}, {0.9, 0.0});
  ASSERT_EQ(c.window().size(), 1u);
  const auto d = c.step({0.03, 1e-5}, {0.9, 0.0});
  EXPECT_EQ(d.mode, ControllerMode::sleeping);
  EXPECT_EQ(c.window().size(), 0u);
  EXPECT_EQ(d.rate, c.rate());
  EXPECT_EQ(c.step({0.03, 0.5}, {0.0, 0.7}).mode, ControllerMode::sleeping);
  EXPECT_EQ(c.step({0.03, 0.5}, {0.0, 0.7}).mode, ControllerMode::sleeping);
  EXPECT_NE(c.step({0.03, 0.5}, {0.9, 0.7}).mode, ControllerMode::sleeping);
}

TEST(LseController, TwoNoiselessSamplesGiveEquilibrium) {
  LseConfig cfg;
  cfg.r_min = 0.0;
  cfg.r_max = 0.2;
  LseController c(cfg, 0.02);
  const auto first = c.step({0.02, 1.5}, {0.9, 0.3});
  EXPECT_EQ(first.mode, ControllerMode::exploring); // one sample cannot be fitted
  const auto d = c.step({0.08, -1.5}, {0.9, 0.3});
  EXPECT_EQ(d.mode, ControllerMode::learning);
  EXPECT_NEAR(d.rate, 0.05, 1e-15);
  EXPECT_NEAR(d.raw_estimate, 0.05, 1e-15);
}

TEST(LseController, EstimateIsClampedButLoggedRaw) {
  LseConfig cfg;
  cfg.r_min = 0.0;
  cfg.r_max = 0.04;
  LseController c(cfg, 0.02);
  c.step({0.02, 1.5}, {0.9, 0.3});
  const auto d = c.step({0.08, -1.5}, {0.9, 0.3});
  EXPECT_EQ(d.rate, 0.04);
  EXPECT_NEAR(d.raw_estimate, 0.05, 1e-15);
}

TEST(LseController, ExplorationFrequencyMatchesNu) {
  LseConfig cfg;
  cfg.r_min = 0.0;
  cfg.r_max = 0.1;
  cfg.nu = 0.05;
  cfg.delta = 1e-12; // no quiet resets, so every exploration is a coin flip
  LseController c(cfg, 0.05);
  Engine g = make_stream(1, Stream::exploration), z = make_stream(1, Stream::borrower_noise);
  const int n = 10000;
  int explored = 0;
  for (int i = 0; i < n + 2; ++i) {
    const double r = c.rate();
    const auto d = c.step({r, 50 * (0.05 - r) + 0.1 * standard_normal(z)}, draw_exploration(g));
    if (i >= 2) explored += d.mode == ControllerMode::exploring;
  }
  EXPECT_NEAR(explored / double(n), 0.05, 3.0 * std::sqrt(0.05 * 0.95 / n));
}

TEST(LseController, InformedTwinDropsAdversarialSamples) {
  LseConfig cfg;
  cfg.r_min = 0.0;
  cfg.r_max = 0.2;
  LseController blind(cfg, 0.02), informed(cfg, 0.02, true);
  for (auto* c : {&blind, &informed}) {
    c->step({0.02, 1.5}, {0.9, 0.3});
    c->step({0.08, -1.5}, {0.9, 0.3});
    c->step({0.05, 3.0, true}, {0.9, 0.3});
  }
  EXPECT_EQ(blind.window().size(), 3u);
  EXPECT_EQ(informed.window().size(), 2u);
  EXPECT_NEAR(*informed.estimate(), 0.05, 1e-15);
  EXPECT_GT(std::abs(*blind.estimate() - 0.05), 1e-3);
}

TEST(LseController, ConfigValidation) {
  LseConfig cfg;
  cfg.nu = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.r_min = 1.0;
  cfg.r_max = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(BaselineCurve, KinkAndEnds) {
  const BaselineCurve b{0.01, 0.04, 0.75, 0.8};
  EXPECT_EQ(baseline_rate(0.0, b), 0.01);
  EXPECT_NEAR(baseline_rate(0.8, b), 0.05, 1e-15);
  EXPECT_NEAR(baseline_rate(0.8 + 1e-12, b), 0.05, 1e-9);
  EXPECT_NEAR(baseline_rate(1.0, b), 0.8, 1e-15);
  EXPECT_THROW(validate(BaselineCurve{0.0, 0.5, 0.1, 0.8}), ConfigError);
}

TEST(BaselineCurve, NoiselessTrajectoryMatchesGeometricClosedForm) {
  // Absolute flows, fixed supply: r_t = r* + (1 - K eta)^t (K B0 - (r* - R0)).
  Scenario s;
  s.horizon = 500;
  s.initial.supply = 1000;
  s.initial.debt = 300;
  s.params = {0.0, 0.5, 0.7, 0.0};
  s.pool_options.accrue_interest = false;
  s.flow_model = FlowModel::absolute;
  MarketRegime m;
  m.r_ext_borrow = 0.03;
  m.eta_borrow = 1000;
  m.duration = 500;
  s.regimes = {m};
  s.controller.kind = ControllerKind::baseline;
  s.controller.baseline = {0.01, 0.04, 0.2, 0.8};
  const auto log = run_scenario(s);
  const double K = 0.04 / (0.8 * 1000), r_star = 0.03, R0 = 0.01, B0 = 300;
  for (const auto& r : log)
    ASSERT_NEAR(r.r, r_star + std::pow(1 - K * m.eta_borrow, double(r.t)) * (K * B0 - (r_star - R0)), 1e-6)
        << "slot " << r.t;
  const auto profile = convergence_profile(log, true);
  ASSERT_EQ(profile.errors.size(), 1u);
  for (std::size_t t = 0; t < profile.errors[0].size(); ++t)
    EXPECT_NEAR(profile.errors[0][t], std::abs(std::pow(1 - K * m.eta_borrow, double(t)) * (K * B0 - (r_star - R0))), 1e-6);
}
