// Command-line front end: single runs, canned experiments, seed sweeps and
// offline metrics over a directory of run logs.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <lendsim/lendsim.hpp>

namespace fs = std::filesystem;
using namespace lendsim;

namespace {

constexpr int exit_config = 2;
constexpr int exit_invariant = 3;

std::string default_out_dir() {
  const char* env = std::getenv("LENDSIM_OUT_DIR");
  return env && *env ? env : "lendsim_out";
}

std::string run_stem(const Scenario& s) { return s.name + "_seed" + std::to_string(s.seed); }

/// Writes <stem>.csv and <stem>.scenario.json so metrics can be recomputed offline.
void save_run(const fs::path& dir, const Scenario& s, const std::vector<TimeslotRecord>& log) {
  fs::create_directories(dir);
  std::ofstream csv(dir / (run_stem(s) + ".csv"));
  write_csv(csv, log);
  std::ofstream cfg(dir / (run_stem(s) + ".scenario.json"));
  cfg << scenario_to_json(s).dump(2) << '\n';
  if (!csv || !cfg) throw std::runtime_error("cannot write run files under " + dir.string());
}

void save_json(const fs::path& file, const json& j) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

json rate_summary_json(const RateSummary& s, double unit) {
  return {{"median_terminal_error", s.median_terminal_error / unit},
          {"max_drawdown", s.max_drawdown},
          {"exploring_share", s.exploring_share}};
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  Scenario s = load_scenario(config);
  if (seed) s.seed = *seed;
  const auto log = run_scenario(s);
  save_run(out, s, log);
  std::cout << "wrote " << log.size() << " slots to " << (fs::path(out) / (run_stem(s) + ".csv")).string() << '\n';
  return 0;
}

int cmd_reproduce_rate(std::uint64_t seed, const std::string& out) {
  json summary = json::object();
  for (double eta : {50.0, 5.0}) {
    RateExperimentSetup x;
    x.eta_borrow = eta;
    for (ControllerKind k : {ControllerKind::lse, ControllerKind::baseline}) {
      const Scenario s = rate_scenario(seed, k, x);
      const auto log = run_scenario(s);
      save_run(out, s, log);
      summary[s.name] = rate_summary_json(summarize_rate_run(log), x.rate_unit);
    }
  }
  summary["seed"] = seed;
  save_json(fs::path(out) / ("rate_summary_seed" + std::to_string(seed) + ".json"), summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_reproduce_planner(std::uint64_t seed, const std::string& out) {
  const PlannerExperimentSetup x;
  const Scenario s = planner_scenario(seed, x);
  const auto log = run_scenario(s);
  save_run(out, s, log);
  const PlannerSummary p = summarize_planner_run(log, x.step_at);
  const json summary{{"seed", seed},
                     {"c_initial", x.collateral_factor},
                     {"c_before_step", p.c_before_step},
                     {"c_final", p.c_final},
                     {"tail_mean_utilization", p.tail_mean_utilization},
                     {"u_opt", s.planner.u_opt},
                     {"gamma", s.planner.gamma},
                     {"step_at", x.step_at},
                     {"fire_slots", p.fire_slots}};
  save_json(fs::path(out) / ("planner_summary_seed" + std::to_string(seed) + ".json"), summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const std::string& config, std::uint64_t seeds, unsigned parallel, const std::string& out) {
  const Scenario base = load_scenario(config);
  std::atomic<std::uint64_t> next{1};
  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::uint64_t seed = next++; seed <= seeds; seed = next++) {
      try {
        Scenario s = base;
        s.seed = seed;
        save_run(out, s, run_scenario(s));
      } catch (...) {
        const std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < std::max(1u, parallel); ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  std::cout << "swept " << seeds << " seeds of " << base.name << " into " << out << '\n';
  return 0;
}

/// One row per run and metric, computed from the CSV logs alone plus the
/// scenario file written next to each.
int cmd_metrics(const std::string& runs, const std::string& out) {
  if (!fs::is_directory(runs)) throw ConfigError("runs directory not found: " + runs);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(runs))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no run logs under " + runs);

  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream o(out);
  o << "scenario,seed,metric,value\n";
  o.precision(17);
  for (const auto& f : files) {
    const fs::path cfg_path = fs::path(f).replace_extension(".scenario.json");
    if (!fs::exists(cfg_path)) throw ConfigError("missing scenario file for " + f.string());
    const Scenario s = load_scenario(cfg_path.string());
    std::ifstream in(f);
    const auto log = read_csv(in);
    const RateSummary r = summarize_rate_run(log);
    const auto te = detect_equilibrium_slots(log, zetas(s), s.metrics.dwell, s.metrics.tol_mult);
    auto row = [&](const char* metric, double v) {
      o << s.name << ',' << s.seed << ',' << metric << ',' << v << '\n';
    };
    row("median_terminal_error", r.median_terminal_error / s.rate_unit);
    row("max_drawdown", r.max_drawdown);
    row("exploring_share", r.exploring_share);
    row("equilibrium_slots", static_cast<double>(te.slots.size()));
    if (const auto oi = optimality_index(log, te, s.planner.u_opt, s.planner.gamma)) row("optimality_index", *oi);
    std::size_t fires = 0;
    for (const auto& rec : log) fires += rec.optimizer_fired_flag;
    row("optimizer_fires", static_cast<double>(fires));
  }
  if (!o) throw std::runtime_error("cannot write " + out);
  std::cout << "metrics for " << files.size() << " runs written to " << out << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"lendsim: adaptive lending pool simulator"};
  app.require_subcommand(1);

  std::string config, out = default_out_dir(), runs, metrics_out;
  std::uint64_t seed = 1, seeds = 1;
  std::optional<std::uint64_t> run_seed;
  unsigned parallel = std::max(1u, std::thread::hardware_concurrency());

  auto* run = app.add_subcommand("run", "Run one scenario file");
  run->add_option("--config", config, "Scenario JSON")->required();
  run->add_option("--seed", run_seed, "Master seed (overrides the file)");
  run->add_option("--out", out, "Output directory (default $LENDSIM_OUT_DIR)");

  auto* reproduce = app.add_subcommand("reproduce", "Canned experiments");
  reproduce->require_subcommand(1);
  auto* rate = reproduce->add_subcommand("rate", "Rate tracking, learner vs baseline, two elasticities");
  auto* planner = reproduce->add_subcommand("planner", "Collateral re-planning after a volatility step");
  for (auto* sub : {rate, planner}) {
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--out", out, "Output directory (default $LENDSIM_OUT_DIR)");
  }

  auto* sweep = app.add_subcommand("sweep", "Run seeds 1..n of one scenario in parallel");
  sweep->add_option("--config", config, "Scenario JSON")->required();
  sweep->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  sweep->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out, "Output directory (default $LENDSIM_OUT_DIR)");

  auto* metrics = app.add_subcommand("metrics", "Summarize every run log in a directory");
  metrics->add_option("--runs", runs, "Directory of run CSVs")->required();
  metrics->add_option("--out", metrics_out, "Summary CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, run_seed, out);
    if (*rate) return cmd_reproduce_rate(seed, out);
    if (*planner) return cmd_reproduce_planner(seed, out);
    if (*sweep) return cmd_sweep(config, seeds, parallel, out);
    if (*metrics) return cmd_metrics(runs, metrics_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return exit_invariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
