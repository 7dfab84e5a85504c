#pragma once

// Closed-loop simulation: price, settlement, rate control, planning, agent
// flows, admission, one record per slot.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agent_dynamics.hpp"
#include "controllers.hpp"
#include "equilibrium.hpp"
#include "errors.hpp"
#include "market_model.hpp"
#include "pool_engine.hpp"
#include "random.hpp"
#include "risk_planner.hpp"

namespace lendsim {

enum class ControllerKind {
  lse,
  lse_robust,
  baseline,
  fixed,  // rate stays at its initial value
  oracle, // rate pinned to the equilibrium rate of the current regime
};

inline ControllerKind parse_controller_kind(std::string_view s) {
  if (s == "lse") return ControllerKind::lse;
  if (s == "lse-robust") return ControllerKind::lse_robust;
  if (s == "baseline") return ControllerKind::baseline;
  if (s == "fixed") return ControllerKind::fixed;
  if (s == "oracle") return ControllerKind::oracle;
  throw ConfigError("unknown controller kind: " + std::string(s));
}

inline const char* to_string(ControllerKind k) {
  switch (k) {
  case ControllerKind::lse: return "lse";
  case ControllerKind::lse_robust: return "lse-robust";
  case ControllerKind::baseline: return "baseline";
  case ControllerKind::fixed: return "fixed";
  case ControllerKind::oracle: return "oracle";
  }
  return "?";
}

struct ControllerSpec {
  ControllerKind kind = ControllerKind::lse;
  LseConfig lse{};
  BaselineCurve baseline{};
};

struct MetricsConfig {
  int dwell = 20;
  double tol_mult = 1.0;
};

/// Everything needed to reproduce one run. Rate-valued fields (protocol rate,
/// outside rates, controller bounds, baseline curve) are in units of
/// `rate_unit` per slot. Elasticities respond to per-slot rates.
struct Scenario {
  std::string name = "scenario";
  std::int64_t horizon = 1;
  std::uint64_t seed = 0;
  double rate_unit = 1.0;
  PoolState initial{};
  ProtocolParams params{};
  PoolOptions pool_options{};
  FlowModel flow_model = FlowModel::proportional;
  std::vector<MarketRegime> regimes;
  ControllerSpec controller{};
  bool planner_enabled = false;
  PlannerConfig planner{};
  AdversaryConfig adversary{};
  MetricsConfig metrics{};
};

/// Copy with every rate-valued field converted to per-slot fractions.
inline Scenario in_slot_units(const Scenario& s) {
  Scenario out = s;
  const double k = s.rate_unit;
  out.rate_unit = 1.0;
  out.params.rate *= k;
  for (auto& m : out.regimes) {
    m.r_ext_lend *= k;
    m.r_ext_borrow *= k;
  }
  out.controller.lse.r_min *= k;
  out.controller.lse.r_max *= k;
  out.controller.baseline.r0 *= k;
  out.controller.baseline.slope1 *= k;
  out.controller.baseline.slope2 *= k;
  return out;
}

inline void validate(const Scenario& s) {
  if (s.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(s.rate_unit > 0.0) || !std::isfinite(s.rate_unit)) throw ConfigError("rate_unit must be > 0");
  validate(s.params);
  const RegimeSchedule sched(s.regimes);
  if (sched.total_duration() < s.horizon) throw ConfigError("regime durations do not cover the horizon");
  const PoolState& p = s.initial;
  if (!(p.price > 0.0) || !std::isfinite(p.price)) throw ConfigError("initial price must be positive");
  if (!(p.supply >= 0.0 && p.debt >= 0.0 && p.debt <= p.supply) || !std::isfinite(p.supply))
    throw ConfigError("initial pool needs 0 <= debt <= supply");
  if (!(p.collateral >= 0.0)) throw ConfigError("initial collateral must be >= 0");
  if (s.controller.kind == ControllerKind::lse || s.controller.kind == ControllerKind::lse_robust)
    validate(s.controller.lse);
  if (s.controller.kind == ControllerKind::baseline) validate(s.controller.baseline);
  if (s.planner_enabled) validate(s.planner);
  validate(s.adversary);
  if (s.metrics.dwell < 1 || !(s.metrics.tol_mult > 0.0)) throw ConfigError("metrics need dwell >= 1, tol_mult > 0");
}

struct TimeslotRecord {
  std::int64_t t = 0;
  double p = 0.0;
  double r = 0.0;
  double c = 0.0;
  double lt = 0.0;
  double li = 0.0;
  double L = 0.0;
  double B = 0.0;
  double U = 0.0;
  double applied_dB = 0.0;
  double applied_dL = 0.0;
  double default_fraction = 0.0;
  double liquidated_fraction = 0.0;
  ControllerMode controller_mode = ControllerMode::passive;
  bool adversarial_flag = false;
  bool optimizer_fired_flag = false;
  bool clipped_flag = false;
  // Extra columns for offline analysis.
  double C = 0.0;
  std::int64_t regime = 0;
  double r_star = 0.0;
  double u_star = 0.0;
  double r_hat_raw = std::numeric_limits<double>::quiet_NaN();
  double expected_default = 0.0;
  double expected_liquidation = 0.0;
  double dB_rel = 0.0; // applied_dB over pre-flow debt
  double dL_rel = 0.0; // applied_dL over pre-flow supply
};

struct RunOptions {
  /// Drop adversarial samples before fitting (the informed twin of a paired run).
  bool informed = false;
  /// Check pool invariants after every slot.
  bool check_invariants = true;
};

inline std::vector<TimeslotRecord> run_scenario(const Scenario& scenario, const RunOptions& opt = {}) {
  validate(scenario);
  const Scenario sc = in_slot_units(scenario);
  const RegimeSchedule schedule(sc.regimes);

  Engine price_rng = make_stream(sc.seed, Stream::price);
  Engine borrower_rng = make_stream(sc.seed, Stream::borrower_noise);
  Engine lender_rng = make_stream(sc.seed, Stream::lender_noise);
  Engine explore_rng = make_stream(sc.seed, Stream::exploration);
  Engine adversary_rng = make_stream(sc.seed, Stream::adversary);
  Engine planner_rng = make_stream(sc.seed, Stream::planner);

  ProtocolParams params = sc.params;
  PoolState state = sc.initial;
  state.t = 0;
  if (state.collateral == 0.0 && state.debt > 0.0) state = remargin(state, params.collateral_factor);

  const bool learns = sc.controller.kind == ControllerKind::lse || sc.controller.kind == ControllerKind::lse_robust;
  std::optional<LseController> lse;
  if (learns) {
    LseConfig cfg = sc.controller.lse;
    if (sc.controller.kind == ControllerKind::lse_robust) cfg.estimator = Estimator::torrent;
    lse.emplace(cfg, params.rate, opt.informed);
  }
  std::optional<RiskPlanner> planner;
  if (sc.planner_enabled) planner.emplace(sc.planner);

  std::vector<TimeslotRecord> log;
  log.reserve(static_cast<std::size_t>(sc.horizon));

  bool have_prev = false;
  RateObservation prev_obs;
  double prev_u = 0.0, prev_dl = 0.0;

  for (std::int64_t t = 0; t < sc.horizon; ++t) {
    const std::size_t regime_index = schedule.index_at(t);
    const MarketRegime& m = schedule.regimes()[regime_index];

    const double p_new = step_price(state.price, m.step, standard_normal(price_rng));
    if (!(p_new > 0.0) || !std::isfinite(p_new)) throw InvariantViolation(t, "price left the positive reals");
    const SettleOutcome settled = settle(state, p_new, params, sc.pool_options);
    const PoolState& st = settled.state;

    // Drawn unconditionally so every stream advances identically across variants.
    const ExplorationDraw draw = draw_exploration(explore_rng);
    const FlowNoise noise = draw_flow_noise(borrower_rng, lender_rng);
    const double adversary_draw = uniform01(adversary_rng);

    TimeslotRecord rec;
    switch (sc.controller.kind) {
    case ControllerKind::lse:
    case ControllerKind::lse_robust:
      if (have_prev) {
        const RateDecision d = lse->step(prev_obs, draw);
        params.rate = d.rate;
        rec.controller_mode = d.mode;
        rec.r_hat_raw = d.raw_estimate;
      } else {
        rec.controller_mode = ControllerMode::passive;
      }
      break;
    case ControllerKind::baseline:
      params.rate = baseline_rate(st.utilization(), sc.controller.baseline);
      break;
    case ControllerKind::fixed: break;
    case ControllerKind::oracle:
      params.rate = std::max(0.0, equilibrium_rate(m, params));
      break;
    }
    params.rate = std::max(0.0, params.rate);

    if (planner) {
      PlannerObservation po;
      po.rate = prev_obs.rate;
      po.utilization = prev_u;
      po.supply_change = have_prev ? prev_dl : 0.0;
      po.collateral_factor = params.collateral_factor;
      po.price = p_new;
      if (lse) {
        if (std::isfinite(rec.r_hat_raw))
          po.r_hat_star = rec.r_hat_raw;
        else if (auto e = lse->estimate())
          po.r_hat_star = *e;
      }
      if (auto d = planner->step(po, planner_rng)) {
        params.collateral_factor = d->collateral_factor;
        params.liquidation_threshold = d->liquidation_threshold;
        rec.optimizer_fired_flag = true;
      }
    }

    const RiskTerms k = risk_terms(params, m.step);
    const double ub = borrower_utility(params.rate, params.liquidation_incentive, k, m);
    const double ul = lender_utility(st.utilization(), params.rate, k, m);
    const DesiredFlows flows = step_flows(st, ub, ul, m, noise, sc.flow_model);
    const AdversaryStep adv = inject_adversary(flows, st.debt, sc.adversary, adversary_draw);
    const AdmissionOutcome ad = admit_flows(st, adv.flows.debt, adv.flows.supply, params, sc.pool_options);

    const EquilibriumPoint eq =
        utilization_from_margin(m, k.default_rate, equilibrium_rate(m, k, params.liquidation_incentive));

    state = ad.state;
    state.t = t + 1;
    if (opt.check_invariants) check_invariants(state, params, sc.pool_options, t);

    rec.t = t;
    rec.p = p_new;
    rec.r = params.rate;
    rec.c = params.collateral_factor;
    rec.lt = params.liquidation_threshold;
    rec.li = params.liquidation_incentive;
    rec.L = state.supply;
    rec.B = state.debt;
    rec.U = state.utilization();
    rec.applied_dB = ad.applied_debt;
    rec.applied_dL = ad.applied_supply;
    rec.default_fraction = settled.default_fraction;
    rec.liquidated_fraction = settled.liquidated_fraction;
    rec.adversarial_flag = adv.adversarial;
    rec.clipped_flag = ad.clipped;
    rec.C = state.collateral;
    rec.regime = static_cast<std::int64_t>(regime_index);
    rec.r_star = eq.r_star;
    rec.u_star = eq.u_star;
    rec.expected_default = k.default_rate;
    rec.expected_liquidation = k.liquidation;
    rec.dB_rel = st.debt > 0.0 ? ad.applied_debt / st.debt : 0.0;
    rec.dL_rel = st.supply > 0.0 ? ad.applied_supply / st.supply : 0.0;
    log.push_back(rec);

    have_prev = true;
    prev_obs = {params.rate, rec.dB_rel, adv.adversarial};
    prev_u = st.utilization();
    prev_dl = rec.dL_rel;
  }
  return log;
}

} // namespace lendsim
