#pragma once

// Aggregate lending pool: one supply, one debt and one collateral balance.
// Every borrower sits at the same loan-to-value, so a single ratio describes
// the whole book.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <string>

#include "errors.hpp"

namespace lendsim {

struct PoolState {
  std::int64_t t = 0;
  double price = 1.0;      // collateral price in units of the lent asset
  double supply = 0.0;     // L
  double debt = 0.0;       // B
  double collateral = 0.0; // C, in collateral units
  double cumulative_default = 0.0;
  double cumulative_liquidated = 0.0;

  double utilization() const { return supply > 0.0 ? debt / supply : 0.0; }
  double loan_to_value() const {
    if (debt == 0.0) return 0.0;
    const double v = collateral * price;
    return v > 0.0 ? debt / v : INFINITY;
  }
  bool operator==(const PoolState&) const = default;
};

struct ProtocolParams {
  double rate = 0.0;
  double collateral_factor = 0.5;
  double liquidation_threshold = 0.6;
  double liquidation_incentive = 0.0;
  bool operator==(const ProtocolParams&) const = default;
};

inline void validate(const ProtocolParams& q) {
  if (!std::isfinite(q.rate) || q.rate < 0.0) throw ConfigError("rate must be finite and >= 0");
  if (!(q.collateral_factor > 0.0 && q.collateral_factor < q.liquidation_threshold &&
        q.liquidation_threshold < 1.0))
    throw ConfigError("need 0 < collateral_factor < liquidation_threshold < 1");
  if (!std::isfinite(q.liquidation_incentive) || q.liquidation_incentive < 0.0)
    throw ConfigError("liquidation incentive must be finite and >= 0");
}

struct PoolOptions {
  bool accrue_interest = true;
  /// Top surviving positions back up to the collateral factor each slot.
  bool remargin = true;
};

struct DefaultOutcome {
  PoolState state;
  double default_fraction = 0.0; // written-off debt per unit of supply
  double per_debt = 0.0;         // written-off debt per unit of debt
};

/// Writes underwater debt down to the value of its collateral at p_new and
/// charges the loss to lenders. The ratio used is the book's actual
/// loan-to-value, which equals the collateral factor when positions are
/// re-margined.
inline DefaultOutcome apply_default(const PoolState& s, double p_new) {
  if (!(p_new > 0.0) || !std::isfinite(p_new)) throw DomainError("apply_default: price must be positive");
  DefaultOutcome out{s};
  out.state.price = p_new;
  if (s.debt <= 0.0) return out;
  const double d = std::clamp(1.0 - s.collateral * p_new / s.debt, 0.0, 1.0);
  if (d == 0.0) return out;
  const double loss = s.debt * d;
  out.per_debt = d;
  out.default_fraction = s.supply > 0.0 ? loss / s.supply : 0.0;
  out.state.debt = s.debt - loss;
  out.state.supply = std::max(s.supply - loss, out.state.debt);
  out.state.cumulative_default += loss;
  return out;
}

inline DefaultOutcome apply_default(const PoolState& s, double p_new, const ProtocolParams&) {
  return apply_default(s, p_new);
}

/// Borrowers owe r on their debt; the same amount is credited to lenders.
inline PoolState accrue_interest(const PoolState& s, const ProtocolParams& q) {
  PoolState out = s;
  const double delta = q.rate * s.debt;
  out.debt += delta;
  out.supply += delta;
  return out;
}

/// Sets collateral so the book sits exactly at loan-to-value c.
inline PoolState remargin(const PoolState& s, double c) {
  PoolState out = s;
  out.collateral = s.debt > 0.0 ? s.debt / (c * s.price) : 0.0;
  return out;
}

struct LiquidationOutcome {
  PoolState state;
  double liquidated_fraction = 0.0; // repaid debt per unit of pre-liquidation debt
};

/// Liquidators repay just enough debt to bring the book back to lt, taking
/// collateral worth (1 + li) per unit repaid. An underwater book (LTV >= 1)
/// is left to the default step. When the incentive makes full restoration
/// impossible the repayment is capped by the available collateral.
inline LiquidationOutcome apply_liquidation(const PoolState& s, double p_new, const ProtocolParams& q) {
  if (!(p_new > 0.0)) throw DomainError("apply_liquidation: price must be positive");
  const double lt = q.liquidation_threshold;
  const double li = q.liquidation_incentive;
  const double denom = 1.0 - lt * (1.0 + li);
  if (!(denom > 0.0)) throw Infeasible("liquidation cannot restore lt: 1 - lt(1 + li) <= 0");
  LiquidationOutcome out{s};
  out.state.price = p_new;
  if (s.debt <= 0.0 || s.collateral <= 0.0) return out;
  const double value = s.collateral * p_new;
  const double ltv = s.debt / value;
  if (!(ltv > lt) || ltv >= 1.0 - 1e-12) return out;
  double gamma = std::max(0.0, (s.debt - lt * value) / denom);
  gamma = std::min({gamma, s.debt, value / (1.0 + li)});
  out.state.debt = s.debt - gamma;
  out.state.collateral = std::max(0.0, s.collateral - gamma * (1.0 + li) / p_new);
  out.state.cumulative_liquidated += gamma;
  out.liquidated_fraction = gamma / s.debt;
  return out;
}

struct SettleOutcome {
  PoolState state;
  double default_fraction = 0.0;
  double default_per_debt = 0.0;
  double liquidated_fraction = 0.0;
};

/// Start-of-slot bookkeeping under the parameters still in force: default,
/// interest, liquidation at the new price, then optional re-margining of the
/// surviving book.
inline SettleOutcome settle(const PoolState& s, double p_new, const ProtocolParams& q,
                            const PoolOptions& opt = {}) {
  SettleOutcome out;
  auto d = apply_default(s, p_new);
  out.default_fraction = d.default_fraction;
  out.default_per_debt = d.per_debt;
  PoolState st = opt.accrue_interest ? accrue_interest(d.state, q) : d.state;
  auto l = apply_liquidation(st, p_new, q);
  out.state = opt.remargin ? remargin(l.state, q.collateral_factor) : l.state;
  out.liquidated_fraction = l.liquidated_fraction;
  return out;
}

struct AdmissionOutcome {
  PoolState state;
  double applied_debt = 0.0;
  double applied_supply = 0.0;
  bool clipped = false;
};

/// Admits desired flows. Repayments and deposits go through in full (a
/// repayment never exceeds the debt); new borrowing is capped by idle supply
/// and withdrawals by what is left idle after borrowing.
inline AdmissionOutcome admit_flows(const PoolState& s, double desired_debt, double desired_supply,
                                    const ProtocolParams& q, const PoolOptions& opt = {}) {
  if (!std::isfinite(desired_debt) || !std::isfinite(desired_supply))
    throw DomainError("admit_flows: flows must be finite");
  AdmissionOutcome out{s};
  PoolState& st = out.state;
  const double c = q.collateral_factor;

  if (desired_debt < 0.0) {
    const double repay = std::min(-desired_debt, st.debt);
    out.clipped |= repay < -desired_debt;
    if (st.debt > 0.0) st.collateral *= 1.0 - repay / st.debt;
    st.debt -= repay;
    if (repay == s.debt) st.collateral = 0.0;
  }
  if (desired_supply > 0.0) st.supply += desired_supply;
  if (desired_debt > 0.0) {
    const double room = std::max(0.0, st.supply - st.debt);
    const double borrow = std::min(desired_debt, room);
    out.clipped |= borrow < desired_debt;
    st.debt = std::min(st.debt + borrow, st.supply);
    st.collateral += borrow / (c * st.price);
  }
  if (desired_supply < 0.0) {
    const double room = std::max(0.0, st.supply - st.debt);
    const double withdraw = std::min(-desired_supply, room);
    out.clipped |= withdraw < -desired_supply;
    st.supply = std::max(st.supply - withdraw, st.debt);
  }
  if (opt.remargin) st = remargin(st, c);
  out.applied_debt = st.debt - s.debt;
  out.applied_supply = st.supply - s.supply;
  return out;
}

struct SlotResult {
  PoolState state;
  double default_fraction = 0.0;
  double liquidated_fraction = 0.0;
  double applied_debt = 0.0;
  double applied_supply = 0.0;
  bool clipped = false;
};

/// One full slot with a single parameter set: settle, then admit flows.
inline SlotResult run_slot(const PoolState& s, double p_new, const ProtocolParams& q, double desired_debt,
                           double desired_supply, const PoolOptions& opt = {}) {
  auto st = settle(s, p_new, q, opt);
  auto ad = admit_flows(st.state, desired_debt, desired_supply, q, opt);
  SlotResult out{ad.state, st.default_fraction, st.liquidated_fraction, ad.applied_debt, ad.applied_supply,
                 ad.clipped};
  out.state.t = s.t + 1;
  return out;
}

/// Throws InvariantViolation if the state breaks a pool invariant.
inline void check_invariants(const PoolState& s, const ProtocolParams& q, const PoolOptions& opt,
                             std::int64_t slot) {
  auto fail = [&](const std::string& m) { throw InvariantViolation(slot, m); };
  if (!std::isfinite(s.supply) || !std::isfinite(s.debt) || !std::isfinite(s.collateral) ||
      !std::isfinite(s.price))
    fail("non-finite pool balance");
  if (s.debt < 0.0) fail("negative debt");
  if (s.debt > s.supply) fail("debt exceeds supply");
  if (s.collateral < 0.0) fail("negative collateral");
  if (!(s.price > 0.0)) fail("non-positive price");
  if (opt.remargin && s.debt > 0.0) {
    // Relative tolerance plus one subnormal step of rounding in debt and collateral.
    const double c = q.collateral_factor, v = s.collateral * s.price;
    const double grain = std::numeric_limits<double>::denorm_min() * (1.0 + c * s.price);
    if (!(std::abs(s.debt - c * v) <= 1e-9 * c * v + grain))
      fail("loan-to-value drifted from the collateral factor");
  }
}

} // namespace lendsim
