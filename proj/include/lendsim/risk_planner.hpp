#pragma once

// Slow loop: learns the lenders' outside rate from supply flows, backs out
// the borrowers' outside value from the fast controller's rate estimate, and
// re-plans the collateral factor and liquidation threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "random.hpp"
#include "regression.hpp"
#include "riskmath.hpp"

namespace lendsim {

struct PlannerConfig {
  double delta_l = 1e-3;     // quiet threshold on |dL/L|
  double delta_theta = 1e-4; // relative coefficient change that counts as converged
  std::size_t min_samples = 150;
  int t_sleep = 1;
  int t_optimizer = 500;
  double u_opt = 0.5;
  double gamma = 0.0;
  double eps_liq = 1e-6;
  std::size_t vol_window = 200;
  std::size_t window = 1000;
  double alpha = 1.0;
  double liquidation_incentive = 0.0;
  std::size_t grid_levels = 100;
  double kappa = 0.5; // initial descent step, halved until the objective drops
  double gd_tol = 1e-14;
  int gd_max_iters = 500;
  double lt_floor = 1e-6; // smallest gap lt - c
  double lt_tol = 1e-12;
};

inline void validate(const PlannerConfig& p) {
  if (!(p.delta_l > 0.0 && p.delta_theta > 0.0)) throw ConfigError("planner thresholds must be > 0");
  if (!(p.u_opt > 0.0 && p.u_opt < 1.0)) throw ConfigError("planner u_opt must lie in (0, 1)");
  if (!(p.gamma >= 0.0)) throw ConfigError("planner gamma must be >= 0");
  if (!(p.eps_liq > 0.0)) throw ConfigError("planner eps_liq must be > 0");
  if (p.vol_window < 2) throw ConfigError("planner vol_window must be >= 2");
  if (p.window < 2 || p.min_samples < 2) throw ConfigError("planner window and min_samples must be >= 2");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ConfigError("planner alpha must lie in (0, 1]");
  if (!(p.liquidation_incentive >= 0.0)) throw ConfigError("planner liquidation incentive must be >= 0");
  if (p.grid_levels < 2) throw ConfigError("planner grid needs >= 2 levels");
  if (p.t_sleep < 0 || p.t_optimizer < 0) throw ConfigError("planner sleep lengths must be >= 0");
}

struct MarketEstimate {
  double r_o_l_hat = 0.0;
  double r_o_b_hat = 0.0;
  double eta_l_hat = 0.0;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  bool converged = false;

  LogNormalStep step() const { return {mu_hat, sigma_hat}; }
};

/// Sample mean and unbiased standard deviation of one-slot log returns.
inline LogNormalStep estimate_vol(std::span<const double> prices) {
  if (prices.size() < 2) throw DomainError("estimate_vol: need at least two prices");
  const std::size_t n = prices.size() - 1;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(prices[i] > 0.0 && prices[i + 1] > 0.0)) throw DomainError("estimate_vol: prices must be positive");
    mean += std::log(prices[i + 1] / prices[i]);
  }
  mean /= static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::log(prices[i + 1] / prices[i]) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

/// Lender coefficients (outside rate, elasticity) from a supply-flow fit.
struct LenderParams {
  double r_o_l = 0.0;
  double eta_l = 0.0;
};

template <class Range>
LenderParams estimate_lender_params(const Range& window) {
  const ThetaEstimate e = ols_fit(window);
  const auto root = e.root();
  if (!root) throw SingularDesign("lender fit has a flat slope");
  return {*root, e.theta1};
}

/// Borrowers' outside value implied by an equilibrium-rate estimate.
inline double invert_for_r_ob(double r_hat_star, double c, const LogNormalStep& step, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("invert_for_r_ob: alpha must be > 0");
  const double rest = expected_default(c, step) + alpha * expected_price_fall_term(c, step) +
                      (1.0 - alpha) * expected_price_change(step);
  return (r_hat_star - rest) / alpha;
}

/// Utilization lenders settle at when collateral factor c is deployed.
inline double planned_utilization(double c, const MarketEstimate& e, double alpha) {
  const LogNormalStep s = e.step();
  const double b = alpha * e.r_o_b_hat + (1.0 - alpha) * expected_price_change(s);
  const double a_over_c = alpha * expected_price_fall_term(c, s);
  const double margin = b + a_over_c;
  if (!(margin > 0.0)) throw DomainError("planned utilization: no positive lender margin");
  const double u = e.r_o_l_hat / margin;
  if (!(u > 0.0 && u <= 1.0)) throw DomainError("planned utilization outside (0, 1]");
  return u;
}

/// Objective to minimise: squared utilization miss plus gamma times expected default.
inline double optimality_objective(double c, const MarketEstimate& e, const PlannerConfig& cfg) {
  if (!(c > 0.0 && c < 1.0)) throw DomainError("optimality_objective: c must lie in (0, 1)");
  const double u = planned_utilization(c, e, cfg.alpha);
  const double miss = u - cfg.u_opt;
  return miss * miss + cfg.gamma * u * expected_default(c, e.step());
}

/// +inf where the objective is undefined.
inline double objective_or_inf(double c, const MarketEstimate& e, const PlannerConfig& cfg) {
  try {
    return optimality_objective(c, e, cfg);
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Threshold in (lo, hi) with the least expected liquidation. The restoring
/// amount grows like 1 / (1 - lt) near one, so the curve falls and then rises.
inline double least_liquidation_threshold(double c, const LogNormalStep& step, double lo, double hi,
                                          double tol = 1e-12) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = expected_liquidation(c, x1, step), f2 = expected_liquidation(c, x2, step);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = expected_liquidation(c, x1, step);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = expected_liquidation(c, x2, step);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

/// Smallest lt above c whose expected liquidation stays within eps_liq.
inline double choose_liquidation_threshold(double c, const LogNormalStep& step, double eps_liq, double li,
                                           double floor = 1e-6, double tol = 1e-12) {
  if (!(c > 0.0 && c < 1.0)) throw DomainError("choose_liquidation_threshold: c must lie in (0, 1)");
  const double hi = std::min(1.0, 1.0 / (1.0 + li)) - 1e-9;
  double lo = c + floor;
  if (!(lo < hi)) throw Infeasible("no threshold room above c");
  if (expected_liquidation(c, lo, step) <= eps_liq) return lo;
  double good = least_liquidation_threshold(c, step, lo, hi, tol);
  if (expected_liquidation(c, good, step) > eps_liq) throw Infeasible("c too high for the liquidation budget");
  while (good - lo > tol) {
    const double mid = 0.5 * (lo + good);
    if (mid <= lo || mid >= good) break;
    if (expected_liquidation(c, mid, step) <= eps_liq)
      good = mid;
    else
      lo = mid;
  }
  return good;
}

inline bool threshold_feasible(double c, const LogNormalStep& step, const PlannerConfig& cfg) {
  try {
    choose_liquidation_threshold(c, step, cfg.eps_liq, cfg.liquidation_incentive, cfg.lt_floor, cfg.lt_tol);
    return true;
  } catch (const Infeasible&) {
    return false;
  }
}

/// Grid levels (i + 0.5) / n for i = 0..n-1.
inline double grid_level(std::size_t i, std::size_t n) { return (static_cast<double>(i) + 0.5) / n; }

struct CollateralChoice {
  double c = 0.0;
  double objective = 0.0;
  double grid_c = 0.0;
  double descent_c = std::numeric_limits<double>::quiet_NaN();
  bool grid_overrode = false;
};

/// Brute force over the grid, keeping only levels with a feasible threshold.
inline std::optional<std::pair<double, double>> grid_search(const MarketEstimate& e, const PlannerConfig& cfg) {
  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 0; i < cfg.grid_levels; ++i) {
    const double c = grid_level(i, cfg.grid_levels);
    const double v = objective_or_inf(c, e, cfg);
    if (!std::isfinite(v) || !threshold_feasible(c, e.step(), cfg)) continue;
    if (!best || v < best->second) best = {c, v};
  }
  return best;
}

/// Descent on the objective from a random start, checked against the grid.
template <class Rng>
CollateralChoice optimize_collateral(const MarketEstimate& e, const PlannerConfig& cfg, Rng& rng) {
  const auto grid = grid_search(e, cfg);
  if (!grid) throw Infeasible("no feasible collateral factor on the grid");
  const double spacing = 1.0 / static_cast<double>(cfg.grid_levels);
  const double lo = grid_level(0, cfg.grid_levels), hi = grid_level(cfg.grid_levels - 1, cfg.grid_levels);

  CollateralChoice out;
  out.grid_c = grid->first;
  out.c = grid->first;
  out.objective = grid->second;

  double c = std::clamp(uniform01(rng), lo, hi);
  double v = objective_or_inf(c, e, cfg);
  const double h = 1e-6;
  for (int it = 0; it < cfg.gd_max_iters && std::isfinite(v); ++it) {
    const double g = (objective_or_inf(c + h, e, cfg) - objective_or_inf(c - h, e, cfg)) / (2 * h);
    if (!std::isfinite(g) || g == 0.0) break;
    double step = cfg.kappa;
    double c_new = c, v_new = v;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      c_new = std::clamp(c - step * g, lo, hi);
      v_new = objective_or_inf(c_new, e, cfg);
      if (v_new < v) break;
    }
    if (!(v_new < v)) break;
    const double dv = v - v_new;
    c = c_new;
    v = v_new;
    if (dv < cfg.gd_tol) break;
  }
  if (std::isfinite(v)) out.descent_c = c;

  const bool agree = std::isfinite(v) && std::abs(c - grid->first) <= spacing;
  if (agree && v < grid->second && threshold_feasible(c, e.step(), cfg)) {
    out.c = c;
    out.objective = v;
  } else {
    out.grid_overrode = !agree;
  }
  return out;
}

struct PlannerObservation {
  double rate = 0.0;          // rate in force during the observed flow
  double utilization = 0.0;   // utilization before the observed flow
  double supply_change = 0.0; // admitted lender flow over supply before it
  double collateral_factor = 0.0;
  double price = 1.0;         // newest oracle price
  std::optional<double> r_hat_star; // fast controller's latest estimate
};

struct PlannerDecision {
  double collateral_factor = 0.0;
  double liquidation_threshold = 0.0;
  MarketEstimate estimate;
  CollateralChoice choice;
};

class RiskPlanner {
public:
  explicit RiskPlanner(PlannerConfig cfg) : cfg_(cfg), window_(cfg.window) { validate(cfg_); }

  template <class Rng>
  std::optional<PlannerDecision> step(const PlannerObservation& obs, Rng& rng) {
    prices_.push_back(obs.price);
    if (prices_.size() > cfg_.vol_window + 1) prices_.pop_front();

    if (sleep_left_ > 0) {
      --sleep_left_;
      return std::nullopt;
    }
    if (std::abs(obs.supply_change) < cfg_.delta_l) {
      reset();
      sleep_left_ = cfg_.t_sleep;
      return std::nullopt;
    }
    if (prices_.size() < 3) return std::nullopt;

    std::vector<double> hist(prices_.begin(), prices_.end());
    const LogNormalStep vol = estimate_vol(hist);
    estimate_.mu_hat = vol.mu;
    estimate_.sigma_hat = vol.sigma;
    const double pi = expected_default(obs.collateral_factor, vol);
    window_.push(obs.rate * obs.utilization - obs.utilization * pi, obs.supply_change);

    ThetaEstimate theta;
    try {
      theta = ols_fit(window_);
    } catch (const SingularDesign&) {
      return std::nullopt;
    }
    const auto root = theta.root();
    if (!root) return std::nullopt;
    estimate_.r_o_l_hat = *root;
    estimate_.eta_l_hat = theta.theta1;
    if (obs.r_hat_star) {
      try {
        estimate_.r_o_b_hat = invert_for_r_ob(*obs.r_hat_star, obs.collateral_factor, vol, cfg_.alpha);
        have_borrow_side_ = true;
      } catch (const DomainError&) {
        have_borrow_side_ = false;
      }
    }

    const bool settled = prev_theta_ && relative_change(*prev_theta_, theta) < cfg_.delta_theta;
    prev_theta_ = theta;
    estimate_.converged = settled && window_.size() >= cfg_.min_samples && have_borrow_side_;
    if (!estimate_.converged) return std::nullopt;

    std::optional<PlannerDecision> out;
    try {
      PlannerDecision d;
      d.estimate = estimate_;
      d.choice = optimize_collateral(estimate_, cfg_, rng);
      d.collateral_factor = d.choice.c;
      d.liquidation_threshold = choose_liquidation_threshold(d.collateral_factor, vol, cfg_.eps_liq,
                                                             cfg_.liquidation_incentive, cfg_.lt_floor,
                                                             cfg_.lt_tol);
      out = d;
    } catch (const Infeasible&) {
    } catch (const DomainError&) {
    }
    reset();
    sleep_left_ = cfg_.t_optimizer;
    return out;
  }

  const MarketEstimate& estimate() const { return estimate_; }
  const PlannerConfig& config() const { return cfg_; }
  std::size_t window_size() const { return window_.size(); }

private:
  static double relative_change(const ThetaEstimate& a, const ThetaEstimate& b) {
    const double num = std::hypot(a.theta0 - b.theta0, a.theta1 - b.theta1);
    const double den = std::hypot(b.theta0, b.theta1);
    return den > 0.0 ? num / den : INFINITY;
  }

  void reset() {
    window_.clear();
    prev_theta_.reset();
  }

  PlannerConfig cfg_;
  RegressionWindow window_;
  std::deque<double> prices_;
  MarketEstimate estimate_;
  std::optional<ThetaEstimate> prev_theta_;
  bool have_borrow_side_ = false;
  int sleep_left_ = 0;
};

} // namespace lendsim
