#pragma once

// JSON scenario files. Unknown keys are rejected so a typo never silently
// falls back to a default.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "simulation.hpp"

namespace lendsim {

using json = nlohmann::json;

namespace detail {

/// Reads fields of one JSON object and remembers which keys were consumed.
class ObjectReader {
public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void require(const char* key, T& out) {
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    read(key, out);
  }

  const json* child(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline MarketRegime parse_regime(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  MarketRegime m;
  r.require("mu", m.step.mu);
  r.require("sigma", m.step.sigma);
  r.require("r_ext_lend", m.r_ext_lend);
  r.require("r_ext_borrow", m.r_ext_borrow);
  r.require("eta_lend", m.eta_lend);
  r.require("eta_borrow", m.eta_borrow);
  r.read("alpha", m.alpha);
  r.read("zeta", m.zeta);
  r.require("duration", m.duration);
  r.finish();
  return m;
}

inline json regime_to_json(const MarketRegime& m) {
  return json{{"mu", m.step.mu},           {"sigma", m.step.sigma},         {"r_ext_lend", m.r_ext_lend},
              {"r_ext_borrow", m.r_ext_borrow}, {"eta_lend", m.eta_lend}, {"eta_borrow", m.eta_borrow},
              {"alpha", m.alpha},          {"zeta", m.zeta},                {"duration", m.duration}};
}

inline LseConfig parse_lse(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  LseConfig c;
  r.read("delta", c.delta);
  r.read("t_sleep", c.t_sleep);
  r.read("nu", c.nu);
  r.require("r_min", c.r_min);
  r.require("r_max", c.r_max);
  r.read("window", c.window);
  r.read("singularity_floor", c.singularity_floor);
  r.read("assumed_corruption", c.assumed_corruption);
  r.read("torrent_max_iters", c.torrent.max_iters);
  r.read("torrent_tol", c.torrent.tol);
  if (const json* k = r.child("known_eta"); k && !k->is_null()) c.known_eta = k->get<double>();
  r.finish();
  return c;
}

inline json lse_to_json(const LseConfig& c) {
  json j{{"delta", c.delta},
         {"t_sleep", c.t_sleep},
         {"nu", c.nu},
         {"r_min", c.r_min},
         {"r_max", c.r_max},
         {"window", c.window},
         {"singularity_floor", c.singularity_floor},
         {"assumed_corruption", c.assumed_corruption},
         {"torrent_max_iters", c.torrent.max_iters},
         {"torrent_tol", c.torrent.tol}};
  if (c.known_eta) j["known_eta"] = *c.known_eta;
  return j;
}

inline PlannerConfig parse_planner(const json& j, const std::string& path, bool& enabled) {
  ObjectReader r(j, path);
  PlannerConfig p;
  r.read("enabled", enabled);
  r.read("delta_l", p.delta_l);
  r.read("delta_theta", p.delta_theta);
  r.read("min_samples", p.min_samples);
  r.read("t_sleep", p.t_sleep);
  r.read("t_optimizer", p.t_optimizer);
  r.read("u_opt", p.u_opt);
  r.read("gamma", p.gamma);
  r.read("eps_liq", p.eps_liq);
  r.read("vol_window", p.vol_window);
  r.read("window", p.window);
  r.read("alpha", p.alpha);
  r.read("liquidation_incentive", p.liquidation_incentive);
  r.read("grid_levels", p.grid_levels);
  r.read("kappa", p.kappa);
  r.read("gd_tol", p.gd_tol);
  r.read("gd_max_iters", p.gd_max_iters);
  r.read("lt_floor", p.lt_floor);
  r.read("lt_tol", p.lt_tol);
  r.finish();
  return p;
}

inline json planner_to_json(const PlannerConfig& p, bool enabled) {
  return json{{"enabled", enabled},
              {"delta_l", p.delta_l},
              {"delta_theta", p.delta_theta},
              {"min_samples", p.min_samples},
              {"t_sleep", p.t_sleep},
              {"t_optimizer", p.t_optimizer},
              {"u_opt", p.u_opt},
              {"gamma", p.gamma},
              {"eps_liq", p.eps_liq},
              {"vol_window", p.vol_window},
              {"window", p.window},
              {"alpha", p.alpha},
              {"liquidation_incentive", p.liquidation_incentive},
              {"grid_levels", p.grid_levels},
              {"kappa", p.kappa},
              {"gd_tol", p.gd_tol},
              {"gd_max_iters", p.gd_max_iters},
              {"lt_floor", p.lt_floor},
              {"lt_tol", p.lt_tol}};
}

} // namespace detail

inline Scenario scenario_from_json(const json& j) {
  using detail::ObjectReader;
  ObjectReader r(j, "scenario");
  Scenario s;
  r.read("name", s.name);
  r.require("horizon", s.horizon);
  r.read("seed", s.seed);
  r.read("rate_unit", s.rate_unit);

  if (const json* p = r.child("pool")) {
    ObjectReader pr(*p, "scenario.pool");
    pr.require("supply", s.initial.supply);
    pr.require("debt", s.initial.debt);
    pr.read("collateral", s.initial.collateral);
    pr.read("price", s.initial.price);
    pr.finish();
  } else {
    throw ConfigError("scenario: missing key 'pool'");
  }
  if (const json* p = r.child("params")) {
    ObjectReader pr(*p, "scenario.params");
    pr.require("rate", s.params.rate);
    pr.require("collateral_factor", s.params.collateral_factor);
    pr.require("liquidation_threshold", s.params.liquidation_threshold);
    pr.read("liquidation_incentive", s.params.liquidation_incentive);
    pr.finish();
  } else {
    throw ConfigError("scenario: missing key 'params'");
  }
  if (const json* p = r.child("pool_options")) {
    ObjectReader pr(*p, "scenario.pool_options");
    pr.read("accrue_interest", s.pool_options.accrue_interest);
    pr.read("remargin", s.pool_options.remargin);
    pr.finish();
  }
  std::string flow = "proportional";
  r.read("flow_model", flow);
  s.flow_model = parse_flow_model(flow);

  const json* regs = r.child("regimes");
  if (!regs || !regs->is_array() || regs->empty()) throw ConfigError("scenario.regimes: expected a nonempty array");
  for (std::size_t i = 0; i < regs->size(); ++i)
    s.regimes.push_back(detail::parse_regime((*regs)[i], "scenario.regimes[" + std::to_string(i) + "]"));

  if (const json* c = r.child("controller")) {
    ObjectReader cr(*c, "scenario.controller");
    std::string kind = "lse";
    cr.require("kind", kind);
    s.controller.kind = parse_controller_kind(kind);
    if (const json* l = cr.child("lse")) s.controller.lse = detail::parse_lse(*l, "scenario.controller.lse");
    if (const json* b = cr.child("baseline")) {
      ObjectReader br(*b, "scenario.controller.baseline");
      br.require("r0", s.controller.baseline.r0);
      br.require("slope1", s.controller.baseline.slope1);
      br.require("slope2", s.controller.baseline.slope2);
      br.require("u_opt", s.controller.baseline.u_opt);
      br.finish();
    }
    cr.finish();
  } else {
    throw ConfigError("scenario: missing key 'controller'");
  }
  if (const json* p = r.child("planner")) s.planner = detail::parse_planner(*p, "scenario.planner", s.planner_enabled);
  if (const json* a = r.child("adversary")) {
    ObjectReader ar(*a, "scenario.adversary");
    ar.read("beta", s.adversary.beta);
    ar.read("magnitude", s.adversary.magnitude);
    std::string mode = "flip-sign";
    ar.read("mode", mode);
    s.adversary.mode = parse_adversary_mode(mode);
    ar.finish();
  }
  if (const json* m = r.child("metrics")) {
    ObjectReader mr(*m, "scenario.metrics");
    mr.read("dwell", s.metrics.dwell);
    mr.read("tol_mult", s.metrics.tol_mult);
    mr.finish();
  }
  r.finish();
  validate(s);
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  json regs = json::array();
  for (const auto& m : s.regimes) regs.push_back(detail::regime_to_json(m));
  json controller{{"kind", to_string(s.controller.kind)}, {"lse", detail::lse_to_json(s.controller.lse)}};
  if (s.controller.kind == ControllerKind::baseline)
    controller["baseline"] = json{{"r0", s.controller.baseline.r0},
                                  {"slope1", s.controller.baseline.slope1},
                                  {"slope2", s.controller.baseline.slope2},
                                  {"u_opt", s.controller.baseline.u_opt}};
  return json{{"name", s.name},
              {"horizon", s.horizon},
              {"seed", s.seed},
              {"rate_unit", s.rate_unit},
              {"pool",
               {{"supply", s.initial.supply},
                {"debt", s.initial.debt},
                {"collateral", s.initial.collateral},
                {"price", s.initial.price}}},
              {"params",
               {{"rate", s.params.rate},
                {"collateral_factor", s.params.collateral_factor},
                {"liquidation_threshold", s.params.liquidation_threshold},
                {"liquidation_incentive", s.params.liquidation_incentive}}},
              {"pool_options",
               {{"accrue_interest", s.pool_options.accrue_interest}, {"remargin", s.pool_options.remargin}}},
              {"flow_model", to_string(s.flow_model)},
              {"regimes", regs},
              {"controller", controller},
              {"planner", detail::planner_to_json(s.planner, s.planner_enabled)},
              {"adversary",
               {{"beta", s.adversary.beta}, {"magnitude", s.adversary.magnitude}, {"mode", to_string(s.adversary.mode)}}},
              {"metrics", {{"dwell", s.metrics.dwell}, {"tol_mult", s.metrics.tol_mult}}}};
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

} // namespace lendsim
