#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "random.hpp"
#include "riskmath.hpp"

namespace lendsim {

/// Exogenous parameters held constant over one market period.
struct MarketRegime {
  LogNormalStep step;
  double r_ext_lend = 0.0;   // lenders' outside rate
  double r_ext_borrow = 0.0; // financing borrowers' outside value of the asset
  double eta_lend = 0.0;
  double eta_borrow = 0.0;
  double alpha = 1.0; // share of financing borrowers
  double zeta = 0.0;  // flow noise std
  std::int64_t duration = 1;
};

inline void validate(const MarketRegime& m) {
  validate(m.step);
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(m.r_ext_lend) || !finite(m.r_ext_borrow)) throw ConfigError("regime rates must be finite");
  if (!(m.eta_lend >= 0.0) || !(m.eta_borrow >= 0.0) || !finite(m.eta_lend) || !finite(m.eta_borrow))
    throw ConfigError("elasticities must be finite and >= 0");
  if (!(m.alpha >= 0.0 && m.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(m.zeta >= 0.0) || !finite(m.zeta)) throw ConfigError("zeta must be finite and >= 0");
  if (m.duration < 1) throw ConfigError("regime duration must be >= 1");
}

/// Piecewise-constant sequence of regimes. Regime i covers the half-open
/// interval [start_i, start_i + duration_i).
class RegimeSchedule {
public:
  RegimeSchedule() = default;
  explicit RegimeSchedule(std::vector<MarketRegime> regimes) : regimes_(std::move(regimes)) {
    if (regimes_.empty()) throw ConfigError("regime schedule is empty");
    std::int64_t t = 0;
    for (const auto& r : regimes_) {
      validate(r);
      starts_.push_back(t);
      t += r.duration;
    }
    total_ = t;
  }

  std::size_t index_at(std::int64_t t) const {
    if (t < 0 || t >= total_) throw std::out_of_range("slot outside regime schedule");
    auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return static_cast<std::size_t>(it - starts_.begin()) - 1;
  }
  const MarketRegime& at(std::int64_t t) const { return regimes_[index_at(t)]; }
  std::int64_t total_duration() const { return total_; }
  std::span<const MarketRegime> regimes() const { return regimes_; }
  /// First slot of each regime.
  std::span<const std::int64_t> starts() const { return starts_; }

private:
  std::vector<MarketRegime> regimes_;
  std::vector<std::int64_t> starts_;
  std::int64_t total_ = 0;
};

inline const MarketRegime& regime_at(const RegimeSchedule& schedule, std::int64_t t) {
  return schedule.at(t);
}

/// One GBM step driven by a supplied standard normal z.
inline double step_price(double p_prev, const LogNormalStep& s, double z) {
  if (!(p_prev > 0.0)) throw DomainError("step_price: price must be positive");
  return p_prev * std::exp(s.mu + s.sigma * z);
}

template <class Rng>
double step_price(double p_prev, const LogNormalStep& s, Rng& rng) {
  return step_price(p_prev, s, standard_normal(rng));
}

struct PricePath {
  double p0 = 1.0;
  std::vector<double> p; // p[t] is the price observed in slot t
};

/// Price path over the schedule's horizon from the price stream of `seed`.
inline PricePath generate_price_path(const RegimeSchedule& schedule, double p0, std::int64_t horizon,
                                     std::uint64_t seed) {
  if (!(p0 > 0.0)) throw DomainError("initial price must be positive");
  if (horizon > schedule.total_duration()) throw ConfigError("horizon exceeds regime schedule");
  Engine rng = make_stream(seed, Stream::price);
  PricePath path{p0, {}};
  path.p.reserve(static_cast<std::size_t>(horizon));
  double p = p0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    p = step_price(p, schedule.at(t).step, rng);
    path.p.push_back(p);
  }
  return path;
}

} // namespace lendsim
