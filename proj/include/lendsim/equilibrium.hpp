#pragma once

#include <algorithm>

#include "agent_dynamics.hpp"
#include "errors.hpp"
#include "market_model.hpp"
#include "pool_engine.hpp"
#include "riskmath.hpp"

namespace lendsim {

struct EquilibriumPoint {
  double r_star = 0.0;
  double u_star = 1.0;
  /// Utilization pinned at 1: lenders would want more than the pool can pay.
  bool degenerate = false;
};

/// Rate at which borrower utility vanishes, from precomputed risk terms.
/// Includes the liquidation cost li * Lambda, which is zero under a
/// negligible-liquidation threshold.
inline double equilibrium_rate(const MarketRegime& m, const RiskTerms& k, double li = 0.0) {
  return m.alpha * m.r_ext_borrow + k.default_rate + m.alpha * k.fall_term + (1.0 - m.alpha) * k.price_change -
         k.liquidation * li;
}

/// Equilibrium rate at collateral factor c, liquidation cost ignored.
inline double equilibrium_rate(const MarketRegime& m, double c) {
  RiskTerms k;
  k.default_rate = expected_default(c, m.step);
  k.fall_term = expected_price_fall_term(c, m.step);
  k.price_change = expected_price_change(m.step);
  return equilibrium_rate(m, k);
}

/// Equilibrium rate at the deployed parameters, liquidation cost included.
inline double equilibrium_rate(const MarketRegime& m, const ProtocolParams& q) {
  return equilibrium_rate(m, risk_terms(q, m.step), q.liquidation_incentive);
}

inline bool nontrivial(double r_star) { return r_star > 0.0; }

/// Throws when no positive rate balances the borrowers.
inline double require_nontrivial(double r_star) {
  if (!nontrivial(r_star)) throw DomainError("no non-trivial equilibrium");
  return r_star;
}

/// Lender-side equilibrium given r* and the default rate pi at the deployed c.
inline EquilibriumPoint utilization_from_margin(const MarketRegime& m, double default_rate, double r_star) {
  EquilibriumPoint e{r_star, 1.0, true};
  const double margin = r_star - default_rate;
  if (!(margin > 0.0)) return e;
  const double u = m.r_ext_lend / margin;
  if (u > 1.0) return e;
  e.u_star = u;
  e.degenerate = false;
  return e;
}

inline EquilibriumPoint equilibrium_utilization(const MarketRegime& m, double c, double r_star) {
  return utilization_from_margin(m, expected_default(c, m.step), r_star);
}

inline EquilibriumPoint equilibrium_point(const MarketRegime& m, const ProtocolParams& q) {
  const RiskTerms k = risk_terms(q, m.step);
  return utilization_from_margin(m, k.default_rate, equilibrium_rate(m, k, q.liquidation_incentive));
}

inline EquilibriumPoint equilibrium_point(const MarketRegime& m, double c) {
  return equilibrium_utilization(m, c, equilibrium_rate(m, c));
}

} // namespace lendsim
