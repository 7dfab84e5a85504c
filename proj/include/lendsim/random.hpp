#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lendsim {

/// Named random streams derived from one master seed. Each mechanism draws
/// from its own stream so switching one off leaves the others untouched.
enum class Stream : std::uint64_t {
  price = 1,
  lender_noise = 2,
  borrower_noise = 3,
  exploration = 4,
  adversary = 5,
  planner = 6,
  scenario = 7, // scenario generators, e.g. redrawn regimes
};

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Engine make_stream(std::uint64_t master_seed, Stream id) {
  return Engine{splitmix64(splitmix64(master_seed) ^ splitmix64(static_cast<std::uint64_t>(id) << 32))};
}

/// Standard normal draw via Box-Muller on 53-bit uniforms. Written out so the
/// sequence is identical across standard libraries.
template <class Rng>
double standard_normal(Rng& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Uniform draw on [0, 1).
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Normal draw truncated (clamped) at +-limit standard deviations.
template <class Rng>
double truncated_normal(Rng& rng, double limit = 6.0) {
  return std::clamp(standard_normal(rng), -limit, limit);
}

} // namespace lendsim
