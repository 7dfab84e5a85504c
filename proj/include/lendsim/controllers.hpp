#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "errors.hpp"
#include "random.hpp"
#include "regression.hpp"

namespace lendsim {

enum class ControllerMode { sleeping, learning, exploring, passive };

inline const char* to_string(ControllerMode m) {
  switch (m) {
  case ControllerMode::sleeping: return "sleeping";
  case ControllerMode::learning: return "learning";
  case ControllerMode::exploring: return "exploring";
  case ControllerMode::passive: return "passive";
  }
  return "?";
}

inline ControllerMode parse_controller_mode(std::string_view s) {
  if (s == "sleeping") return ControllerMode::sleeping;
  if (s == "learning") return ControllerMode::learning;
  if (s == "exploring") return ControllerMode::exploring;
  if (s == "passive") return ControllerMode::passive;
  throw ConfigError("unknown controller mode: " + std::string(s));
}

enum class Estimator { ols, torrent };

struct LseConfig {
  double delta = 1e-3; // quiet-market threshold on |dB/B|
  int t_sleep = 1;     // extra dormant slots after a quiet one
  double nu = 0.05;    // exploration probability
  double r_min = 0.0;
  double r_max = 1.0;
  std::size_t window = 50;
  double singularity_floor = 1e-9;
  Estimator estimator = Estimator::ols;
  double assumed_corruption = 0.35; // torrent keeps ceil((1 - this) * n) samples
  TorrentOptions torrent{};
  /// When set, the slope is taken as -eta and only the intercept is learned.
  std::optional<double> known_eta;
};

inline void validate(const LseConfig& c) {
  if (!(c.delta > 0.0)) throw ConfigError("lse delta must be > 0");
  if (c.t_sleep < 0) throw ConfigError("lse t_sleep must be >= 0");
  if (!(c.nu > 0.0 && c.nu < 1.0)) throw ConfigError("lse nu must lie in (0, 1)");
  if (!(c.r_min < c.r_max) || !std::isfinite(c.r_min) || !std::isfinite(c.r_max))
    throw ConfigError("lse needs finite r_min < r_max");
  if (c.window < 2) throw ConfigError("lse window must be >= 2");
  if (!(c.assumed_corruption >= 0.0 && c.assumed_corruption < 0.5))
    throw ConfigError("assumed corruption must lie in [0, 0.5)");
  if (c.known_eta && !(*c.known_eta > 0.0)) throw ConfigError("known eta must be > 0");
}

/// What the controller saw in the previous slot.
struct RateObservation {
  double rate = 0.0;        // rate in force while the flow happened
  double debt_change = 0.0; // admitted borrower flow over debt before the flow
  bool adversarial = false;
};

/// Uniform draws consumed every slot, used or not, so paired runs stay aligned.
struct ExplorationDraw {
  double coin = 1.0;
  double level = 0.0;
};

template <class Rng>
ExplorationDraw draw_exploration(Rng& rng) {
  const double coin = uniform01(rng);
  return {coin, uniform01(rng)};
}

struct RateDecision {
  double rate = 0.0;
  ControllerMode mode = ControllerMode::learning;
  double raw_estimate = std::numeric_limits<double>::quiet_NaN(); // before clamping
};

/// Least-squares rate controller with exploration and quiet-market sleep.
/// An informed controller drops samples known to be adversarial; with the
/// corrupt samples gone a robust estimator has nothing left to trim.
class LseController {
public:
  LseController(LseConfig cfg, double initial_rate, bool informed = false)
      : cfg_(std::move(cfg)), window_(cfg_.window), rate_(initial_rate), informed_(informed) {
    validate(cfg_);
  }

  RateDecision step(const RateObservation& obs, const ExplorationDraw& draw) {
    if (sleep_left_ > 0) {
      --sleep_left_;
      return {rate_, ControllerMode::sleeping};
    }
    if (std::abs(obs.debt_change) < cfg_.delta) {
      window_.clear();
      sleep_left_ = cfg_.t_sleep;
      return {rate_, ControllerMode::sleeping};
    }
    if (!(informed_ && obs.adversarial)) window_.push(obs.rate, obs.debt_change, obs.adversarial);

    RateDecision d;
    std::optional<double> root = estimate();
    bool explore = !root.has_value() || draw.coin < cfg_.nu;
    if (root) d.raw_estimate = *root;
    if (explore) {
      rate_ = cfg_.r_min + draw.level * (cfg_.r_max - cfg_.r_min);
      d.mode = ControllerMode::exploring;
    } else {
      rate_ = std::clamp(*root, cfg_.r_min, cfg_.r_max);
      d.mode = ControllerMode::learning;
    }
    d.rate = rate_;
    return d;
  }

  /// Current estimate of the equilibrium rate from the window, if identifiable.
  std::optional<double> estimate() const {
    if (cfg_.known_eta) {
      if (window_.empty()) return std::nullopt;
      return root_with_known_slope(window_, -*cfg_.known_eta);
    }
    try {
      last_fit_ = fit();
    } catch (const SingularDesign&) {
      last_fit_.reset();
      return std::nullopt;
    }
    return last_fit_->root(cfg_.singularity_floor);
  }

  ThetaEstimate fit() const {
    if (cfg_.estimator == Estimator::torrent && !informed_) {
      TorrentOptions opt = cfg_.torrent;
      const auto n = static_cast<double>(window_.size());
      opt.keep = static_cast<std::size_t>(std::ceil((1.0 - cfg_.assumed_corruption) * n));
      return torrent_gd_fit(window_, opt);
    }
    return ols_fit(window_);
  }

  double rate() const { return rate_; }
  const RegressionWindow& window() const { return window_; }
  const std::optional<ThetaEstimate>& last_fit() const { return last_fit_; }
  const LseConfig& config() const { return cfg_; }

private:
  LseConfig cfg_;
  RegressionWindow window_;
  double rate_;
  bool informed_;
  int sleep_left_ = 0;
  mutable std::optional<ThetaEstimate> last_fit_;
};

/// Piecewise-linear utilization curve with a kink at u_opt.
struct BaselineCurve {
  double r0 = 0.0;
  double slope1 = 0.0;
  double slope2 = 0.0;
  double u_opt = 0.8;
};

inline void validate(const BaselineCurve& b) {
  if (!(b.u_opt > 0.0 && b.u_opt < 1.0)) throw ConfigError("baseline u_opt must lie in (0, 1)");
  if (!(b.slope1 >= 0.0 && b.slope2 >= b.slope1)) throw ConfigError("baseline needs slope2 >= slope1 >= 0");
  if (!std::isfinite(b.r0)) throw ConfigError("baseline r0 must be finite");
}

inline double baseline_rate(double u, const BaselineCurve& b) {
  if (u <= b.u_opt) return b.r0 + u / b.u_opt * b.slope1;
  return b.r0 + b.slope1 + (u - b.u_opt) / (1.0 - b.u_opt) * b.slope2;
}

} // namespace lendsim
