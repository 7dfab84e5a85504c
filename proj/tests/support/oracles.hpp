#pragma once

// Independent reference computations: Monte-Carlo estimates of the
// definitional integrals and composite Simpson quadrature.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>

namespace oracle {

struct Estimate {
  double mean = 0.0;
  double se = 0.0; // standard error of the mean
};

/// Sample mean and standard error of f(Z) for n standard normal Z drawn with
/// the standard library's own normal distribution.
inline Estimate mc_normal(const std::function<double(double)>& f, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = f(z(g));
    s += v;
    s2 += v * v;
  }
  const double m = s / static_cast<double>(n);
  const double var = (s2 / static_cast<double>(n) - m * m) * static_cast<double>(n) / static_cast<double>(n - 1);
  return {m, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

/// Conditional mean of f(Z) given pred(Z), with its standard error.
inline Estimate mc_normal_conditional(const std::function<double(double)>& f,
                                      const std::function<bool(double)>& pred, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  double s = 0.0, s2 = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z(g);
    if (!pred(x)) continue;
    const double v = f(x);
    s += v;
    s2 += v * v;
    ++k;
  }
  const double m = s / static_cast<double>(k);
  const double var = (s2 / static_cast<double>(k) - m * m) * static_cast<double>(k) / static_cast<double>(k - 1);
  return {m, std::sqrt(std::max(var, 0.0) / static_cast<double>(k))};
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// E[g(Z)] restricted to Z in [a, b], by quadrature.
inline double normal_expectation(const std::function<double(double)>& g, double a, double b, int n = 20000) {
  return simpson([&](double z) { return g(z) * normal_pdf(z); }, a, b, n);
}

/// E[max(0, 1 - X/c)] with ln X = mu + sigma Z: the default integrand.
inline double default_by_quadrature(double c, double mu, double sigma) {
  const double kink = (std::log(c) - mu) / sigma; // X < c below this z
  if (kink <= -12.0) return 0.0;
  return normal_expectation([&](double z) { return 1.0 - std::exp(mu + sigma * z) / c; }, -12.0, kink);
}

/// E[X - 1 | X < 1] / c.
inline double fall_by_quadrature(double c, double mu, double sigma) {
  const double kink = -mu / sigma;
  const double p = normal_expectation([](double) { return 1.0; }, -12.0, kink);
  const double m = normal_expectation([&](double z) { return std::exp(mu + sigma * z) - 1.0; }, -12.0, kink);
  return m / p / c;
}

/// E[(1 - (lt/c) X) / (1 - lt) ; X < c / lt].
inline double liquidation_by_quadrature(double c, double lt, double mu, double sigma) {
  const double kink = (std::log(c / lt) - mu) / sigma;
  if (kink <= -12.0) return 0.0;
  return normal_expectation([&](double z) { return (1.0 - lt / c * std::exp(mu + sigma * z)) / (1.0 - lt); }, -12.0,
                            kink);
}

} // namespace oracle
