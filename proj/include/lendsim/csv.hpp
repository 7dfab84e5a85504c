#pragma once

// Run logs as CSV: one header row, one row per slot, doubles with 17
// significant digits so a parse returns the exact values.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "simulation.hpp"

namespace lendsim {

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "t",          "p",          "r",
      "c",          "lt",         "li",
      "L",          "B",          "U",
      "applied_dB", "applied_dL", "default_fraction",
      "liquidated_fraction", "controller_mode", "adversarial_flag",
      "optimizer_fired_flag", "clipped_flag", "C",
      "regime",     "r_star",     "u_star",
      "r_hat_raw",  "expected_default", "expected_liquidation",
      "dB_rel",     "dL_rel"};
  return cols;
}

namespace detail {

inline void put(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

inline double to_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("bad number in csv: '" + s + "'");
  return v;
}

inline std::int64_t to_int(const std::string& s) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw ConfigError("bad integer in csv: '" + s + "'");
  return v;
}

inline bool to_bool(const std::string& s) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ConfigError("bad flag in csv: '" + s + "'");
}

} // namespace detail

inline std::string csv_row(const TimeslotRecord& r) {
  using detail::put;
  std::string line = std::to_string(r.t);
  const double head[] = {r.p, r.r, r.c, r.lt, r.li, r.L, r.B, r.U, r.applied_dB, r.applied_dL,
                         r.default_fraction, r.liquidated_fraction};
  for (double v : head) {
    line += ',';
    put(line, v);
  }
  line += ',';
  line += to_string(r.controller_mode);
  for (bool b : {r.adversarial_flag, r.optimizer_fired_flag, r.clipped_flag}) line += b ? ",1" : ",0";
  line += ',';
  put(line, r.C);
  line += ',' + std::to_string(r.regime);
  const double tail[] = {r.r_star, r.u_star, r.r_hat_raw, r.expected_default, r.expected_liquidation,
                         r.dB_rel, r.dL_rel};
  for (double v : tail) {
    line += ',';
    if (std::isnan(v))
      line += "nan";
    else
      put(line, v);
  }
  return line;
}

inline void write_csv(std::ostream& out, const std::vector<TimeslotRecord>& log) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : log) out << csv_row(r) << '\n';
}

inline std::vector<TimeslotRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv is empty");
  {
    std::vector<std::string> header;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < std::max(header.size(), cols.size()); ++i) {
      if (i >= header.size()) throw ConfigError("csv header is missing column '" + cols[i] + "'");
      if (i >= cols.size()) throw ConfigError("csv header has unexpected column '" + header[i] + "'");
      if (header[i] != cols[i])
        throw ConfigError("csv header column " + std::to_string(i) + " is '" + header[i] + "', expected '" +
                          cols[i] + "'");
    }
  }
  std::vector<TimeslotRecord> log;
  std::vector<std::string> f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    f.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != csv_columns().size()) throw ConfigError("csv row has the wrong number of fields");
    using namespace detail;
    TimeslotRecord r;
    std::size_t i = 0;
    r.t = to_int(f[i++]);
    for (double* d : {&r.p, &r.r, &r.c, &r.lt, &r.li, &r.L, &r.B, &r.U, &r.applied_dB, &r.applied_dL,
                      &r.default_fraction, &r.liquidated_fraction})
      *d = to_double(f[i++]);
    r.controller_mode = parse_controller_mode(f[i++]);
    r.adversarial_flag = to_bool(f[i++]);
    r.optimizer_fired_flag = to_bool(f[i++]);
    r.clipped_flag = to_bool(f[i++]);
    r.C = to_double(f[i++]);
    r.regime = to_int(f[i++]);
    for (double* d : {&r.r_star, &r.u_star, &r.r_hat_raw, &r.expected_default, &r.expected_liquidation, &r.dB_rel,
                      &r.dL_rel})
      *d = to_double(f[i++]);
    log.push_back(r);
  }
  return log;
}

/// Field-wise equality treating NaN as equal to NaN.
inline bool same_record(const TimeslotRecord& a, const TimeslotRecord& b) {
  auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  return a.t == b.t && eq(a.p, b.p) && eq(a.r, b.r) && eq(a.c, b.c) && eq(a.lt, b.lt) && eq(a.li, b.li) &&
         eq(a.L, b.L) && eq(a.B, b.B) && eq(a.U, b.U) && eq(a.applied_dB, b.applied_dB) &&
         eq(a.applied_dL, b.applied_dL) && eq(a.default_fraction, b.default_fraction) &&
         eq(a.liquidated_fraction, b.liquidated_fraction) && a.controller_mode == b.controller_mode &&
         a.adversarial_flag == b.adversarial_flag && a.optimizer_fired_flag == b.optimizer_fired_flag &&
         a.clipped_flag == b.clipped_flag && eq(a.C, b.C) && a.regime == b.regime && eq(a.r_star, b.r_star) &&
         eq(a.u_star, b.u_star) && eq(a.r_hat_raw, b.r_hat_raw) && eq(a.expected_default, b.expected_default) &&
         eq(a.expected_liquidation, b.expected_liquidation) && eq(a.dB_rel, b.dB_rel) && eq(a.dL_rel, b.dL_rel);
}

} // namespace lendsim
