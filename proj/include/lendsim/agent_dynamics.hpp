#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "market_model.hpp"
#include "pool_engine.hpp"
#include "random.hpp"
#include "riskmath.hpp"

namespace lendsim {

/// Per-slot risk expectations at the deployed (c, lt).
struct RiskTerms {
  double default_rate = 0.0;     // pi(c)
  double fall_term = 0.0;        // F(c)
  double price_change = 0.0;     // G
  double liquidation = 0.0;      // Lambda(c, lt)
};

inline RiskTerms risk_terms(const ProtocolParams& q, const LogNormalStep& step) {
  RiskTerms k;
  k.default_rate = expected_default(q.collateral_factor, step);
  k.fall_term = expected_price_fall_term(q.collateral_factor, step);
  k.price_change = expected_price_change(step);
  k.liquidation = expected_liquidation(q.collateral_factor, q.liquidation_threshold, step);
  return k;
}

inline double lender_utility(double utilization, double rate, const RiskTerms& k, const MarketRegime& m) {
  return rate * utilization - utilization * k.default_rate - m.r_ext_lend;
}

inline double lender_utility(const PoolState& s, const ProtocolParams& q, const MarketRegime& m) {
  return lender_utility(s.utilization(), q.rate, risk_terms(q, m.step), m);
}

/// Mix of financing borrowers (share alpha) and leveraged traders.
inline double borrower_utility(double rate, double li, const RiskTerms& k, const MarketRegime& m) {
  const double risk = k.default_rate - k.liquidation * li - rate;
  return m.alpha * (m.r_ext_borrow + k.fall_term) + (1.0 - m.alpha) * k.price_change + risk;
}

inline double borrower_utility(const PoolState&, const ProtocolParams& q, const MarketRegime& m) {
  return borrower_utility(q.rate, q.liquidation_incentive, risk_terms(q, m.step), m);
}

enum class FlowModel {
  proportional, // flows scale with the current balance
  absolute,     // flows are absolute amounts
};

inline FlowModel parse_flow_model(std::string_view s) {
  if (s == "proportional") return FlowModel::proportional;
  if (s == "absolute") return FlowModel::absolute;
  throw ConfigError("unknown flow model: " + std::string(s));
}

inline const char* to_string(FlowModel f) { return f == FlowModel::proportional ? "proportional" : "absolute"; }

/// Standard normal shocks for one slot, already truncated.
struct FlowNoise {
  double borrower = 0.0;
  double lender = 0.0;
};

template <class Rng>
FlowNoise draw_flow_noise(Rng& borrower_rng, Rng& lender_rng) {
  return {truncated_normal(borrower_rng), truncated_normal(lender_rng)};
}

struct DesiredFlows {
  double debt = 0.0;
  double supply = 0.0;
  double debt_drive = 0.0; // utility-driven part of the debt flow
};

inline DesiredFlows step_flows(const PoolState& s, double borrower_u, double lender_u, const MarketRegime& m,
                               const FlowNoise& z, FlowModel model = FlowModel::proportional) {
  DesiredFlows f;
  if (model == FlowModel::proportional) {
    f.debt_drive = s.debt * m.eta_borrow * borrower_u;
    f.debt = f.debt_drive + s.debt * m.zeta * z.borrower;
    f.supply = s.supply * (m.eta_lend * lender_u + m.zeta * z.lender);
  } else {
    f.debt_drive = m.eta_borrow * borrower_u;
    f.debt = f.debt_drive + m.zeta * z.borrower;
    f.supply = m.eta_lend * lender_u + m.zeta * z.lender;
  }
  return f;
}

template <class Rng>
DesiredFlows step_flows(const PoolState& s, const ProtocolParams& q, const MarketRegime& m, Rng& borrower_rng,
                        Rng& lender_rng, FlowModel model = FlowModel::proportional) {
  const RiskTerms k = risk_terms(q, m.step);
  return step_flows(s, borrower_utility(q.rate, q.liquidation_incentive, k, m),
                    lender_utility(s.utilization(), q.rate, k, m), m, draw_flow_noise(borrower_rng, lender_rng),
                    model);
}

enum class AdversaryMode { flip_sign, push_up, push_down };

inline AdversaryMode parse_adversary_mode(std::string_view s) {
  if (s == "flip-sign") return AdversaryMode::flip_sign;
  if (s == "constant-push-up") return AdversaryMode::push_up;
  if (s == "constant-push-down") return AdversaryMode::push_down;
  throw ConfigError("unknown adversary mode: " + std::string(s));
}

inline const char* to_string(AdversaryMode a) {
  switch (a) {
  case AdversaryMode::flip_sign: return "flip-sign";
  case AdversaryMode::push_up: return "constant-push-up";
  case AdversaryMode::push_down: return "constant-push-down";
  }
  return "?";
}

struct AdversaryConfig {
  double beta = 0.0;      // share of slots controlled by the adversary
  double magnitude = 0.0; // push size, relative to debt
  AdversaryMode mode = AdversaryMode::flip_sign;
};

inline void validate(const AdversaryConfig& a) {
  if (!(a.beta >= 0.0 && a.beta < 0.5)) throw ConfigError("adversary beta must lie in [0, 0.5)");
  if (!std::isfinite(a.magnitude) || a.magnitude < 0.0) throw ConfigError("adversary magnitude must be >= 0");
}

struct AdversaryStep {
  DesiredFlows flows;
  bool adversarial = false;
};

/// Rewrites the borrower flow on adversarial slots. Exactly one draw per call
/// so the schedule does not depend on beta's effect elsewhere.
inline AdversaryStep inject_adversary(const DesiredFlows& f, double debt, const AdversaryConfig& a, double draw) {
  AdversaryStep out{f, draw < a.beta};
  if (!out.adversarial) return out;
  switch (a.mode) {
  case AdversaryMode::flip_sign:
    out.flows.debt = f.debt - 2.0 * f.debt_drive;
    out.flows.debt_drive = -f.debt_drive;
    break;
  case AdversaryMode::push_up: out.flows.debt = f.debt + a.magnitude * debt; break;
  case AdversaryMode::push_down: out.flows.debt = f.debt - a.magnitude * debt; break;
  }
  return out;
}

template <class Rng>
AdversaryStep inject_adversary(const DesiredFlows& f, double debt, const AdversaryConfig& a, Rng& rng) {
  return inject_adversary(f, debt, a, uniform01(rng));
}

} // namespace lendsim
