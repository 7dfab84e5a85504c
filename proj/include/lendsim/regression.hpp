#pragma once

// Two-coefficient linear regression y = theta0 + theta1 * x used by both the
// rate controller (x = rate, y = relative debt change) and the risk planner
// (x = lender yield, y = relative supply change).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace lendsim {

struct Sample {
  double x = 0.0;
  double y = 0.0;
  bool flagged = false; // known-corrupt, used only by informed controllers
};

/// Sliding window holding the most recent `capacity` samples.
class RegressionWindow {
public:
  explicit RegressionWindow(std::size_t capacity = 50) : capacity_(capacity) {
    if (capacity_ < 2) throw ConfigError("regression window needs capacity >= 2");
  }

  void push(double x, double y, bool flagged = false) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw DomainError("regression sample must be finite");
    samples_.push_back({x, y, flagged});
    if (samples_.size() > capacity_) samples_.pop_front();
  }
  void clear() { samples_.clear(); }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Sample>& samples() const { return samples_; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

private:
  std::size_t capacity_;
  std::deque<Sample> samples_;
};

struct ThetaEstimate {
  double theta0 = 0.0;
  double theta1 = 0.0;
  bool converged = true;
  int iterations = 0;

  /// Zero of the fitted line, -theta0/theta1. Undefined on a flat fit.
  std::optional<double> root(double floor = 1e-9) const {
    if (!(std::abs(theta1) >= floor)) return std::nullopt;
    return -theta0 / theta1;
  }
};

namespace detail {

template <class Range>
void require_identifiable(const Range& samples) {
  std::size_t n = 0;
  double lo = INFINITY, hi = -INFINITY;
  for (const Sample& s : samples) {
    ++n;
    lo = std::min(lo, s.x);
    hi = std::max(hi, s.x);
  }
  if (n < 2) throw SingularDesign("regression needs at least two samples");
  if (!(hi > lo)) throw SingularDesign("regression needs two distinct regressor values");
}

} // namespace detail

/// Ordinary least squares via centred sums.
template <class Range>
ThetaEstimate ols_fit(const Range& samples) {
  detail::require_identifiable(samples);
  double n = 0.0, mx = 0.0, my = 0.0;
  for (const Sample& s : samples) {
    n += 1.0;
    mx += s.x;
    my += s.y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const Sample& s : samples) {
    sxx += (s.x - mx) * (s.x - mx);
    sxy += (s.x - mx) * (s.y - my);
  }
  if (!(sxx > 0.0)) throw SingularDesign("regressor variance vanished");
  ThetaEstimate e;
  e.theta1 = sxy / sxx;
  e.theta0 = my - e.theta1 * mx;
  return e;
}

/// Zero x0 of y = slope * (x - x0) when the slope is known: the mean of
/// x - y / slope. Unbiased for any sample size.
template <class Range>
double root_with_known_slope(const Range& samples, double slope) {
  if (slope == 0.0) throw DomainError("known slope must be nonzero");
  double n = 0.0, acc = 0.0;
  for (const Sample& s : samples) {
    n += 1.0;
    acc += s.x - s.y / slope;
  }
  if (n == 0.0) throw SingularDesign("no samples");
  return acc / n;
}

struct TorrentOptions {
  std::size_t keep = 0;   // active-set size k; 0 means all samples
  double kappa = 0.0;     // step size; 0 picks 0.5 / lambda_max
  int max_iters = 2000;
  double tol = 1e-13;     // on the coefficient step, in standardized units
  bool shortcut_full = true; // k >= n: return the direct least-squares solve
};

/// Largest eigenvalue of a symmetric 2x2 matrix by power iteration.
inline double power_iteration_2x2(double a, double b, double d, int iters = 200) {
  double v0 = 1.0, v1 = 0.618;
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    const double w0 = a * v0 + b * v1;
    const double w1 = b * v0 + d * v1;
    const double norm = std::hypot(w0, w1);
    if (norm == 0.0) return 0.0;
    lambda = v0 * w0 + v1 * w1; // Rayleigh quotient with unit v
    v0 = w0 / norm;
    v1 = w1 / norm;
  }
  return std::max(lambda, a * v0 * v0 + 2 * b * v0 * v1 + d * v1 * v1);
}

/// Robust fit by gradient descent on the k samples with smallest residuals,
/// the active set being recomputed after every step. Runs in standardized
/// regressor coordinates, starting from zero coefficients.
template <class Range>
ThetaEstimate torrent_gd_fit(const Range& samples, TorrentOptions opt = {}) {
  detail::require_identifiable(samples);
  std::vector<Sample> pts(std::begin(samples), std::end(samples));
  const std::size_t n = pts.size();
  const std::size_t k = opt.keep == 0 ? n : std::min(opt.keep, n);
  if (k < 2) throw SingularDesign("active set smaller than two samples");
  if (k == n && opt.shortcut_full) return ols_fit(pts);

  double mx = 0.0;
  for (const auto& s : pts) mx += s.x;
  mx /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& s : pts) var += (s.x - mx) * (s.x - mx);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (!(sd > 0.0)) throw SingularDesign("regressor variance vanished");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (pts[i].x - mx) / sd;

  double g00 = 0.0, g01 = 0.0, g11 = 0.0;
  for (double zi : z) {
    g00 += 1.0;
    g01 += zi;
    g11 += zi * zi;
  }
  const double kappa = opt.kappa > 0.0 ? opt.kappa : 0.5 / power_iteration_2x2(g00, g01, g11);

  double a = 0.0, b = 0.0; // y = a + b z
  std::vector<std::pair<double, std::size_t>> res(n);
  ThetaEstimate e;
  e.converged = false;
  for (int it = 1; it <= opt.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) res[i] = {std::abs(pts[i].y - a - b * z[i]), i};
    std::nth_element(res.begin(), res.begin() + static_cast<std::ptrdiff_t>(k - 1), res.end());
    double ga = 0.0, gb = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = res[j].second;
      const double r = a + b * z[i] - pts[i].y;
      ga += r;
      gb += r * z[i];
    }
    const double da = kappa * ga, db = kappa * gb;
    a -= da;
    b -= db;
    e.iterations = it;
    if (std::hypot(da, db) < opt.tol * (1.0 + std::hypot(a, b))) {
      e.converged = true;
      break;
    }
  }
  e.theta1 = b / sd;
  e.theta0 = a - e.theta1 * mx;
  return e;
}

} // namespace lendsim
