#pragma once

// Canned scenarios: rate tracking under redrawn borrower outside rates, and
// collateral re-planning after a volatility step.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "random.hpp"
#include "simulation.hpp"

namespace lendsim {

struct RateExperimentSetup {
  double supply = 1e12;
  double debt = 7e11;
  double eta_lend = 50.0;
  double eta_borrow = 50.0;
  double zeta = 0.1;
  int regimes = 20;
  int regime_length = 100;
  double r_min = 1.0;
  double r_max = 20.0;
  double r_ext_borrow_lo = 4.0; // redraw range for the borrowers' outside rate
  double r_ext_borrow_hi = 16.0;
  double r_ext_lend = 2.0;
  double rate_unit = 1e-3;
  double sigma = 1e-3;
  double collateral_factor = 0.5;
  double nu = 0.05;
  double delta = 1e-3;
  int t_sleep = 1;
  std::size_t window = 50;
  // Centred so its rate near the lender-balanced utilization sits inside the
  // range of equilibrium rates the redraws produce.
  BaselineCurve baseline{8.0, 8.0, 60.0, 0.8};
};

/// Rate-tracking scenario. The borrowers' outside rate is redrawn uniformly
/// every regime from the scenario stream of `seed`, so both controllers see
/// the same market.
inline Scenario rate_scenario(std::uint64_t seed, ControllerKind kind, const RateExperimentSetup& x = {}) {
  Scenario s;
  s.name = std::string("rate-") + to_string(kind) + "-eta" + std::to_string(static_cast<int>(x.eta_borrow));
  s.seed = seed;
  s.rate_unit = x.rate_unit;
  s.horizon = static_cast<std::int64_t>(x.regimes) * x.regime_length;
  s.initial.supply = x.supply;
  s.initial.debt = x.debt;
  s.initial.price = 1.0;
  s.params = {x.r_min, x.collateral_factor, std::min(0.99, x.collateral_factor + 0.3), 0.0};
  Engine g = make_stream(seed, Stream::scenario);
  for (int i = 0; i < x.regimes; ++i) {
    MarketRegime m;
    m.step = {0.0, x.sigma};
    m.r_ext_lend = x.r_ext_lend;
    m.r_ext_borrow = x.r_ext_borrow_lo + uniform01(g) * (x.r_ext_borrow_hi - x.r_ext_borrow_lo);
    m.eta_lend = x.eta_lend;
    m.eta_borrow = x.eta_borrow;
    m.alpha = 1.0;
    m.zeta = x.zeta;
    m.duration = x.regime_length;
    s.regimes.push_back(m);
  }
  s.controller.kind = kind;
  s.controller.lse.r_min = x.r_min;
  s.controller.lse.r_max = x.r_max;
  s.controller.lse.nu = x.nu;
  s.controller.lse.delta = x.delta;
  s.controller.lse.t_sleep = x.t_sleep;
  s.controller.lse.window = x.window;
  s.controller.baseline = x.baseline;
  return s;
}

struct RateSummary {
  double median_terminal_error = 0.0; // in per-slot rate
  double max_drawdown = 0.0;
  double exploring_share = 0.0;
};

inline RateSummary summarize_rate_run(const std::vector<TimeslotRecord>& log, std::size_t tail = 50) {
  RateSummary s;
  s.median_terminal_error = median(terminal_rate_errors(log, tail));
  s.max_drawdown = max_drawdown(log);
  std::size_t explore = 0;
  for (const auto& r : log) explore += r.controller_mode == ControllerMode::exploring;
  s.exploring_share = static_cast<double>(explore) / static_cast<double>(log.size());
  return s;
}

/// Paired LSE / baseline runs over a set of seeds at one borrower elasticity.
struct RateComparison {
  double eta_borrow = 0.0;
  std::vector<RateSummary> lse;
  std::vector<RateSummary> baseline;
  double lse_error() const { return median_of(lse, &RateSummary::median_terminal_error); }
  double baseline_error() const { return median_of(baseline, &RateSummary::median_terminal_error); }
  double lse_drawdown() const { return median_of(lse, &RateSummary::max_drawdown); }
  double baseline_drawdown() const { return median_of(baseline, &RateSummary::max_drawdown); }

private:
  static double median_of(const std::vector<RateSummary>& v, double RateSummary::*f) {
    std::vector<double> x;
    for (const auto& s : v) x.push_back(s.*f);
    return median(x);
  }
};

inline RateComparison compare_rate_controllers(std::span<const std::uint64_t> seeds, RateExperimentSetup x) {
  RateComparison out;
  out.eta_borrow = x.eta_borrow;
  for (std::uint64_t seed : seeds) {
    out.lse.push_back(summarize_rate_run(run_scenario(rate_scenario(seed, ControllerKind::lse, x))));
    out.baseline.push_back(summarize_rate_run(run_scenario(rate_scenario(seed, ControllerKind::baseline, x))));
  }
  return out;
}

struct PlannerExperimentSetup {
  double supply = 1e12;
  double debt = 4e11;
  double eta_lend = 50.0;
  double eta_borrow = 20.0;
  double zeta = 0.02;
  double alpha = 0.05;
  double r_ext_borrow = 0.1;
  double r_ext_lend = 0.0015;
  double sigma_before = 0.05;
  double sigma_after = 0.15;
  std::int64_t step_at = 3000;
  std::int64_t horizon = 6000;
  double collateral_factor = 0.95;
  double liquidation_threshold = 0.99;
  double liquidation_incentive = 0.0;
  double r_min = 0.001;
  double r_max = 0.009;
  double nu = 0.02;
  std::size_t lse_window = 200;
  double lse_delta = 1e-5;
  std::size_t vol_window = 300;
  std::size_t min_samples = 500;
  double initial_rate = 0.005;
  double delta_l = 1e-5;
  double delta_theta = 1e-3;
};

/// Volatility step with the collateral planner on top of the LSE controller.
inline Scenario planner_scenario(std::uint64_t seed, const PlannerExperimentSetup& x = {}) {
  Scenario s;
  s.name = "planner-vol-step";
  s.seed = seed;
  s.horizon = x.horizon;
  s.initial.supply = x.supply;
  s.initial.debt = x.debt;
  s.initial.price = 1.0;
  s.params = {x.initial_rate, x.collateral_factor, x.liquidation_threshold, x.liquidation_incentive};
  // Flow-only balances so the pool settles at the utilization the planner targets.
  s.pool_options.accrue_interest = false;
  for (double sigma : {x.sigma_before, x.sigma_after}) {
    MarketRegime m;
    m.step = {0.0, sigma};
    m.r_ext_lend = x.r_ext_lend;
    m.r_ext_borrow = x.r_ext_borrow;
    m.eta_lend = x.eta_lend;
    m.eta_borrow = x.eta_borrow;
    m.alpha = x.alpha;
    m.zeta = x.zeta;
    m.duration = s.regimes.empty() ? x.step_at : x.horizon - x.step_at;
    s.regimes.push_back(m);
  }
  s.controller.kind = ControllerKind::lse;
  s.controller.lse.r_min = x.r_min;
  s.controller.lse.r_max = x.r_max;
  s.controller.lse.window = x.lse_window;
  s.controller.lse.delta = x.lse_delta;
  s.controller.lse.nu = x.nu;
  s.planner_enabled = true;
  s.planner.alpha = x.alpha;
  s.planner.delta_l = x.delta_l;
  s.planner.delta_theta = x.delta_theta;
  s.planner.vol_window = x.vol_window;
  s.planner.min_samples = x.min_samples;
  s.planner.liquidation_incentive = x.liquidation_incentive;
  return s;
}

struct PlannerSummary {
  double c_before_step = 0.0; // deployed c in the last slot before the volatility step
  double c_final = 0.0;
  double tail_mean_utilization = 0.0;
  std::vector<std::int64_t> fire_slots;
};

inline PlannerSummary summarize_planner_run(const std::vector<TimeslotRecord>& log, std::int64_t step_at,
                                            std::size_t tail = 1500) {
  if (log.empty() || step_at < 1 || static_cast<std::size_t>(step_at) > log.size())
    throw DomainError("planner summary: step slot outside the log");
  PlannerSummary s;
  s.c_before_step = log[static_cast<std::size_t>(step_at - 1)].c;
  s.c_final = log.back().c;
  const std::size_t n = std::min(tail, log.size());
  for (std::size_t i = log.size() - n; i < log.size(); ++i) s.tail_mean_utilization += log[i].U;
  s.tail_mean_utilization /= static_cast<double>(n);
  for (const auto& r : log)
    if (r.optimizer_fired_flag) s.fire_slots.push_back(r.t);
  return s;
}

} // namespace lendsim
