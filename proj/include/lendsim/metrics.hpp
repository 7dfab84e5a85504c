#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "simulation.hpp"

namespace lendsim {

/// Slots judged to be at equilibrium: both relative flows stayed below
/// 3 * zeta * tol_mult for `dwell` consecutive slots.
struct EquilibriumSlotSet {
  std::vector<std::int64_t> slots;
  int dwell = 20;
  double tol_mult = 1.0;
};

/// zeta_by_regime[i] is the noise level of regime i as logged in the record.
inline EquilibriumSlotSet detect_equilibrium_slots(std::span<const TimeslotRecord> log,
                                                   std::span<const double> zeta_by_regime, int dwell = 20,
                                                   double tol_mult = 1.0) {
  if (dwell < 1) throw DomainError("dwell must be >= 1");
  EquilibriumSlotSet out{{}, dwell, tol_mult};
  int run = 0;
  for (const auto& r : log) {
    const auto i = static_cast<std::size_t>(r.regime);
    if (i >= zeta_by_regime.size()) throw DomainError("record regime outside the noise table");
    const double thr = std::max(3.0 * zeta_by_regime[i] * tol_mult, 1e-12);
    const bool quiet = std::abs(r.dB_rel) < thr && std::abs(r.dL_rel) < thr;
    run = quiet ? run + 1 : 0;
    if (run >= dwell) out.slots.push_back(r.t);
  }
  return out;
}

inline EquilibriumSlotSet detect_equilibrium_slots(std::span<const TimeslotRecord> log, double zeta, int dwell = 20,
                                                   double tol_mult = 1.0) {
  std::int64_t max_regime = 0;
  for (const auto& r : log) max_regime = std::max(max_regime, r.regime);
  const std::vector<double> z(static_cast<std::size_t>(max_regime) + 1, zeta);
  return detect_equilibrium_slots(log, z, dwell, tol_mult);
}

inline std::vector<double> zetas(const Scenario& s) {
  std::vector<double> z;
  for (const auto& m : s.regimes) z.push_back(m.zeta);
  return z;
}

/// Error paths |r - r*| after each regime change, indexed by slots since it.
struct ConvergenceProfile {
  std::vector<std::int64_t> disruption_slots;
  std::vector<std::vector<double>> errors;
};

inline ConvergenceProfile convergence_profile(std::span<const TimeslotRecord> log, bool include_start = false) {
  ConvergenceProfile out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const bool change = i == 0 ? include_start : log[i].regime != log[i - 1].regime;
    if (change) {
      out.disruption_slots.push_back(log[i].t);
      out.errors.emplace_back();
    }
    if (!out.errors.empty()) out.errors.back().push_back(std::abs(log[i].r - log[i].r_star));
  }
  return out;
}

/// Empirical q-quantile (linear interpolation) of a sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Pointwise (1 - delta)-quantile across all error paths that reach tau.
inline std::vector<double> quantile_envelope(std::span<const ConvergenceProfile> profiles, double delta) {
  std::size_t len = 0;
  for (const auto& p : profiles)
    for (const auto& e : p.errors) len = std::max(len, e.size());
  std::vector<double> env;
  for (std::size_t tau = 0; tau < len; ++tau) {
    std::vector<double> at;
    for (const auto& p : profiles)
      for (const auto& e : p.errors)
        if (tau < e.size()) at.push_back(e[tau]);
    env.push_back(quantile(at, 1.0 - delta));
  }
  return env;
}

/// Mean over T_e of -(U - U_opt)^2 - gamma (U pi(c) + Lambda(c, lt)). Empty
/// T_e gives nullopt, which is distinct from a score of zero.
inline std::optional<double> optimality_index(std::span<const TimeslotRecord> log, const EquilibriumSlotSet& te,
                                              double u_opt, double gamma) {
  if (te.slots.empty()) return std::nullopt;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::int64_t t : te.slots) {
    auto it = std::lower_bound(log.begin(), log.end(), t,
                               [](const TimeslotRecord& r, std::int64_t v) { return r.t < v; });
    if (it == log.end() || it->t != t) throw DomainError("equilibrium slot missing from the log");
    const double miss = it->U - u_opt;
    acc += -miss * miss - gamma * (it->U * it->expected_default + it->expected_liquidation);
    ++n;
  }
  return acc / static_cast<double>(n);
}

/// Median |r - r*| over the final `tail` slots of each regime segment.
inline std::vector<double> terminal_rate_errors(std::span<const TimeslotRecord> log, std::size_t tail = 50) {
  std::vector<double> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= log.size(); ++i) {
    if (i < log.size() && log[i].regime == log[start].regime) continue;
    const std::size_t from = i - std::min(tail, i - start);
    std::vector<double> e;
    for (std::size_t j = from; j < i; ++j) e.push_back(std::abs(log[j].r - log[j].r_star));
    out.push_back(median(e));
    start = i;
  }
  return out;
}

/// Largest fractional fall of B from a running peak.
inline double max_drawdown(std::span<const TimeslotRecord> log) {
  double peak = 0.0, worst = 0.0;
  for (const auto& r : log) {
    peak = std::max(peak, r.B);
    if (peak > 0.0) worst = std::max(worst, 1.0 - r.B / peak);
  }
  return worst;
}

/// Least-squares slope of y on x.
inline double fitted_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fitted_slope needs two or more paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

/// Cumulative rate gap over T_e between a blind run and its informed twin.
inline double rate_gap(std::span<const TimeslotRecord> blind, std::span<const TimeslotRecord> informed,
                       const EquilibriumSlotSet& te) {
  if (blind.size() != informed.size()) throw DomainError("paired runs differ in length");
  double gap = 0.0;
  for (std::int64_t t : te.slots) gap += blind[static_cast<std::size_t>(t)].r - informed[static_cast<std::size_t>(t)].r;
  return gap;
}

struct SusceptibilityResult {
  std::vector<double> per_seed;
  double mean = 0.0;
};

/// Paired runs per seed sharing every random stream; the informed twin drops
/// adversarial samples before fitting. T_e comes from the blind run.
inline SusceptibilityResult adversarial_susceptibility(Scenario scenario, std::span<const std::uint64_t> seeds) {
  SusceptibilityResult out;
  const auto z = zetas(scenario);
  for (std::uint64_t seed : seeds) {
    scenario.seed = seed;
    const auto blind = run_scenario(scenario, {.informed = false});
    const auto informed = run_scenario(scenario, {.informed = true});
    const auto te = detect_equilibrium_slots(blind, z, scenario.metrics.dwell, scenario.metrics.tol_mult);
    out.per_seed.push_back(rate_gap(blind, informed, te));
  }
  for (double g : out.per_seed) out.mean += g;
  if (!out.per_seed.empty()) out.mean /= static_cast<double>(out.per_seed.size());
  return out;
}

} // namespace lendsim
