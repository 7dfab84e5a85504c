#pragma once

// Closed-form expectations for a log-normal one-slot price ratio X = p_t / p_{t-1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "errors.hpp"

namespace lendsim {

/// ln X ~ N(mu, sigma^2). sigma == 0 is allowed and means a deterministic ratio e^mu.
struct LogNormalStep {
  double mu = 0.0;
  double sigma = 0.0;
};

inline void validate(const LogNormalStep& s) {
  if (!std::isfinite(s.mu) || !std::isfinite(s.sigma) || s.sigma < 0.0)
    throw DomainError("log-normal step needs finite mu and sigma >= 0");
}

/// Standard normal CDF.
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// E[X].
inline double lognormal_mean(const LogNormalStep& s) {
  return std::exp(s.mu + s.sigma * s.sigma / 2);
}

/// Expected per-unit default E[max(0, 1 - X/c)] on a position at loan-to-value c.
inline double expected_default(double c, const LogNormalStep& s) {
  validate(s);
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("expected_default: c must be positive");
  if (s.sigma == 0.0) return std::max(0.0, 1.0 - std::exp(s.mu) / c);
  const double z = (std::log(c) - s.mu) / s.sigma;
  const double v = std_normal_cdf(z) - lognormal_mean(s) / c * std_normal_cdf(z - s.sigma);
  return std::max(0.0, v);
}

/// E[X - 1 | X < 1] / c. Negative: the collateral loss a financing borrower
/// avoids, per unit borrowed.
inline double expected_price_fall_term(double c, const LogNormalStep& s) {
  validate(s);
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("expected_price_fall_term: c must be positive");
  // Zero volatility: the limit of the conditional fall as sigma -> 0.
  if (s.sigma == 0.0) return s.mu < 0.0 ? std::expm1(s.mu) / c : 0.0;
  const double fall = std_normal_cdf(-s.mu / s.sigma);
  if (!(fall > std::numeric_limits<double>::min()))
    throw DomainError("expected_price_fall_term: fall probability negligible");
  const double cond = lognormal_mean(s) * std_normal_cdf((-s.mu - s.sigma * s.sigma) / s.sigma) / fall;
  return (cond - 1.0) / c;
}

/// E[X] - 1. The price exposure carried by a leveraged (non-financing) borrower.
inline double expected_price_change(const LogNormalStep& s) {
  validate(s);
  return std::expm1(s.mu + s.sigma * s.sigma / 2);
}

/// Expected liquidated fraction of debt at threshold lt for a position at
/// loan-to-value c, with 0 < c < lt < 1. Liquidation fires when X < c/lt.
inline double expected_liquidation(double c, double lt, const LogNormalStep& s) {
  validate(s);
  if (!(c > 0.0 && c < lt && lt < 1.0))
    throw DomainError("expected_liquidation: need 0 < c < lt < 1");
  const double k = lt / c;
  if (s.sigma == 0.0) {
    const double x = std::exp(s.mu);
    return x * k < 1.0 ? (1.0 - k * x) / (1.0 - lt) : 0.0;
  }
  const double z = (std::log(c / lt) - s.mu) / s.sigma;
  const double v = std_normal_cdf(z) - k * lognormal_mean(s) * std_normal_cdf(z - s.sigma);
  return std::max(0.0, v / (1.0 - lt));
}

} // namespace lendsim
