// riskgate: closed-form risk bounds, Monte Carlo batches, eta estimation and
// table reproduction from the command line.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "riskgate/mc.hpp"
#include "riskgate/reference.hpp"
#include "riskgate/risk.hpp"
#include "riskgate/rng.hpp"
#include "riskgate/scenarios.hpp"

#ifndef RISKGATE_CONFIG_DIR
#define RISKGATE_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace riskgate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;
constexpr int kExitRuntime = 4;

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  long long seed = -1;
  int trials = 0;
  int workers = 0;
  std::string out = "results";
  bool pretty = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool needs_config) {
  auto* c = cmd->add_option("config", o.config, "scenario config (JSON)");
  if (needs_config) c->required();
  cmd->add_option("--set", o.overrides, "override a config entry, dotted.path=value")->take_all();
  cmd->add_option("--seed", o.seed, "base seed (default: mc.seed)");
  cmd->add_option("-N,--trials", o.trials, "number of trials (default: mc.N)");
  cmd->add_option("--workers", o.workers, "worker threads (default: RISKGATE_WORKERS or all cores)");
  cmd->add_option("--out", o.out, "results root directory");
  cmd->add_flag("--pretty", o.pretty, "human-readable tables instead of JSON");
}

Json resolved_config(const RunOptions& o) {
  Json cfg = load_config(o.config);
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.seed >= 0) cfg["mc"]["seed"] = static_cast<std::uint64_t>(o.seed);
  if (o.trials > 0) cfg["mc"]["N"] = o.trials;
  return cfg;
}

void print_config(const Json& cfg) { std::cerr << "resolved config:\n" << cfg.dump(2) << "\n"; }

std::string config_path(const std::string& dir, const std::string& file) {
  const fs::path local = fs::path(dir) / file;
  if (fs::exists(local)) return local.string();
  return (fs::path(RISKGATE_CONFIG_DIR) / file).string();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

void write_batch(const std::string& dir, const BatchResult& batch) {
  std::ofstream(fs::path(dir) / "batch.json") << batch_json(batch).dump(2) << "\n";
  std::ofstream csv(fs::path(dir) / "maxB.csv");
  write_max_barrier_csv(csv, batch);
  std::ofstream outcomes(fs::path(dir) / "outcomes.csv");
  write_outcomes_csv(outcomes, batch);
}

// ---- bounds ---------------------------------------------------------------

struct BoundsOptions {
  std::string kind;
  double alpha = 0.0, beta = 0.0, gamma = 0.0, eta = 0.0, horizon = 1.0, integral = 0.0, rho_d = 1.0, level = 1.0;
  std::vector<double> levels, etas, budgets;
  double gap = -1.0;
};

int run_bounds(const BoundsOptions& o) {
  Json out;
  out["kind"] = o.kind;
  if (o.kind == "scbf") {
    if (o.alpha < 0.0 || o.beta < 0.0) throw DomainError("scbf: alpha and beta must be >= 0");
    if (o.gamma < 0.0 || o.gamma > 1.0) throw DomainError("scbf: gamma must lie in [0, 1]");
    if (!(o.horizon > 0.0)) throw DomainError("scbf: T must be > 0");
    const BoundResult r = scbf_risk_bound(o.alpha, o.beta, o.gamma, o.horizon);
    out["inputs"] = {{"alpha", o.alpha}, {"beta", o.beta}, {"gamma", o.gamma}, {"T", o.horizon}};
    out["value"] = r.value;
    out["branch"] = r.branch;
    if (r.clamped) {
      out["clamped_from"] = r.raw;
      std::cerr << "note: bound clamped to [0, 1] from " << r.raw << "\n";
    }
  } else if (o.kind == "racbf-min") {
    if (!(o.horizon > 0.0) || o.eta < 0.0) throw DomainError("racbf-min: need eta >= 0 and T > 0");
    if (o.gamma < 0.0 || o.gamma > 1.0) throw DomainError("racbf-min: gamma must lie in [0, 1]");
    out["inputs"] = {{"gamma", o.gamma}, {"eta", o.eta}, {"T", o.horizon}};
    out["value"] = racbf_min_risk(o.gamma, o.eta, o.horizon);
  } else if (o.kind == "racbf-h") {
    const RiskParams p{o.gamma, o.eta, o.horizon, o.rho_d};
    out["inputs"] = {{"I_L", o.integral}, {"gamma", o.gamma}, {"eta", o.eta}, {"T", o.horizon}, {"rho_d", o.rho_d}};
    if (o.gap >= 0.0) {
      out["inputs"]["gap"] = o.gap;
      out["value"] = racbf_h(o.integral, p, o.gap);
    } else {
      out["value"] = racbf_h(o.integral, p);
    }
  } else if (o.kind == "thm3") {
    if (o.gamma < 0.0 || o.gamma >= 1.0 || !(o.horizon > 0.0)) throw DomainError("thm3: need 0 <= gamma < 1, T > 0");
    const EtaThreshold t = eta_threshold(o.gamma, o.horizon);
    out["inputs"] = {{"gamma", o.gamma}, {"T", o.horizon}};
    if (t.never_tighter) {
      out["value"] = "never-tighter";
      out["branch"] = "gamma=0";
    } else {
      out["value"] = t.value;
    }
  } else if (o.kind == "cascade") {
    CascadeSpec spec{o.levels, o.etas, o.budgets, o.horizon};
    spec.validate();
    const CascadeBound c = cascaded_risk_bound(spec);
    out["inputs"] = {{"levels", o.levels}, {"etas", o.etas}, {"T", o.horizon}};
    if (!o.budgets.empty()) out["inputs"]["rho_d"] = o.budgets;
    out["per_level"] = c.per_level;
    out["value"] = c.product;
  } else if (o.kind == "wiener") {
    if (!(o.level > 0.0) || !(o.horizon > 0.0)) throw DomainError("wiener: need a > 0 and T > 0");
    out["inputs"] = {{"a", o.level}, {"T", o.horizon}};
    out["value"] = wiener_sup_law(o.level, o.horizon);
  } else {
    throw ConfigError("unknown bound kind '" + o.kind + "'");
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---- simulate / estimate-eta / validate -----------------------------------

int run_simulate(const RunOptions& o, int trajectory) {
  const Json cfg = resolved_config(o);
  print_config(cfg);
  const auto scenario = build_scenario(cfg);
  const BatchResult batch = run_batch(*scenario, scenario->trials(), scenario->base_seed(), o.workers);
  const std::string dir = make_results_dir(o.out, scenario->name());
  write_batch(dir, batch);
  if (trajectory >= 0) {
    const std::uint64_t seed = derive_seed(scenario->base_seed(), static_cast<std::uint64_t>(trajectory));
    auto trial = scenario->instantiate(seed, true);
    const TrajectoryRecord rec =
        simulate_trial(trial->model, *trial->controller, trial->barriers, trial->x0, scenario->trial_config(seed));
    std::ofstream traj(fs::path(dir) / ("trajectory_" + std::to_string(trajectory) + ".csv"));
    write_trajectory_csv(traj, rec);
    if (auto* filter = dynamic_cast<CbfFilterController*>(trial->controller.get())) {
      std::ofstream dbg(fs::path(dir) / ("filter_" + std::to_string(trajectory) + ".csv"));
      write_filter_debug_csv(dbg, filter->debug_rows());
    }
  }
  const Json summary = summarize({batch});
  if (o.pretty) {
    std::cout << "scenario " << batch.scenario << "  N=" << batch.trials << "  unsafe=" << batch.unsafe
              << "  measured rho=" << fmt(batch.measured_rho) << "  wilson95=[" << fmt(batch.wilson[0]) << ", "
              << fmt(batch.wilson[1]) << "]  predicted(" << batch.predicted.formula
              << ")=" << fmt(batch.predicted.value) << "\n";
    for (const auto& [tag, count] : batch.outcomes) std::cout << "  " << tag << ": " << count << "\n";
    std::cout << "  infeasible steps: " << batch.infeasible_steps << " in " << batch.trials_with_infeasible
              << " trials\n  results: " << dir << "\n";
  } else {
    Json out = batch_json(batch);
    out.erase("config");
    out["results_dir"] = dir;
    std::cout << out.dump(2) << "\n";
  }
  return kExitOk;
}

int run_estimate_eta(const RunOptions& o) {
  const Json cfg = resolved_config(o);
  print_config(cfg);
  const auto scenario = build_scenario(cfg);
  const EtaEstimate est = estimate_eta(*scenario, scenario->trials(), scenario->base_seed(), o.workers);
  const std::string dir = make_results_dir(o.out, scenario->name());
  std::ofstream csv(fs::path(dir) / "eta.csv");
  write_eta_csv(csv, est);
  for (const auto& w : est.warnings) std::cerr << "warning: " << w << "\n";
  if (o.pretty) {
    for (std::size_t b = 0; b < est.barriers.size(); ++b) {
      std::cout << std::setw(14) << est.barriers[b];
      for (const auto& e : est.eta[b]) std::cout << "  " << std::setw(10) << (e ? fmt(*e) : std::string("-"));
      std::cout << "\n";
    }
  } else {
    Json out = eta_json(est);
    out["results_dir"] = dir;
    std::cout << out.dump(2) << "\n";
  }
  return kExitOk;
}

int run_validate(const RunOptions& o) {
  const Json cfg = resolved_config(o);
  print_config(cfg);
  const auto scenario = build_scenario(cfg, false);
  bool ok = true;
  for (const CheckResult& r : scenario->validate()) {
    std::cout << (r.ok ? "ok    " : "FAIL  ") << r.module << " / " << r.check << ": " << r.detail << "\n";
    ok = ok && r.ok;
  }
  return ok ? kExitOk : kExitConfig;
}

// ---- reproduce ------------------------------------------------------------

struct Verdict {
  std::vector<std::string> failures;
  void check(bool ok, const std::string& what) {
    std::cout << (ok ? "  pass  " : "  FAIL  ") << what << "\n";
    if (!ok) failures.push_back(what);
  }
};

BatchResult batch_for(const std::string& path, const std::vector<std::string>& overrides, const RunOptions& o,
                      const std::string& tag) {
  Json cfg = load_config(path);
  for (const auto& s : overrides) apply_override(cfg, s);
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.trials > 0) cfg["mc"]["N"] = o.trials;
  cfg["name"] = tag;
  print_config(cfg);
  const auto scenario = build_scenario(cfg);
  BatchResult b = run_batch(*scenario, scenario->trials(), scenario->base_seed(), o.workers);
  write_batch(make_results_dir(o.out, tag), b);
  return b;
}

int run_reproduce(const std::string& table, const std::string& config_dir, const RunOptions& o) {
  Verdict v;
  if (table == "I") {
    std::cout << "theoretical  measured  alpha  beta  gamma  T\n";
    for (std::size_t i = 0; i < 2; ++i) {
      const auto [alpha, beta] = std::pair{reference::kScbfGains[i][0], reference::kScbfGains[i][1]};
      const BatchResult b = batch_for(config_path(config_dir, "robot_scbf.cfg"),
                                      {"barriers.0.alpha=" + fmt(alpha), "barriers.0.beta=" + fmt(beta)}, o,
                                      "robot_scbf_" + std::to_string(i + 1));
      std::cout << fmt(b.predicted.value) << "  " << fmt(b.measured_rho) << "  " << alpha << "  " << beta
                << "  0.5  1\n";
      v.check(std::abs(b.predicted.value - reference::kScbfTheoretical[i]) <= 1e-3,
              "theoretical " + fmt(b.predicted.value) + " vs " + fmt(reference::kScbfTheoretical[i]) + " (1e-3)");
      v.check(b.unsafe == 0, "measured unsafe trials " + std::to_string(b.unsafe) + " == 0");
    }
  } else if (table == "II") {
    std::cout << "predicted  measured  gamma  eta\n";
    for (std::size_t i = 0; i < 2; ++i) {
      const double rho = reference::kRacbfBudgets[i];
      const BatchResult b = batch_for(config_path(config_dir, "robot_racbf.cfg"),
                                      {"barriers.0.rho_d=[" + fmt(rho) + "]"}, o, "robot_racbf_" + std::to_string(i + 1));
      std::cout << fmt(rho) << "  " << fmt(b.measured_rho) << " [" << fmt(b.wilson[0]) << ", " << fmt(b.wilson[1])
                << "]  0.5  " << reference::kRobotEta << "   (reference measured " << reference::kRacbfMeasured[i]
                << ")\n";
      if (i == 0) {
        v.check(b.measured_rho <= 0.003, "rho_d 0.01: measured " + fmt(b.measured_rho) + " <= 0.003");
      } else {
        v.check(b.measured_rho >= 0.40 && b.measured_rho <= 0.52,
                "rho_d 0.505: measured " + fmt(b.measured_rho) + " in [0.40, 0.52]");
      }
    }
  } else if (table == "IV") {
    const std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    const auto row = [&](const std::string& name, const std::array<double, 5>& eta,
                         const std::array<double, 4>& expected) {
      CascadeSpec spec{levels, {eta.begin(), eta.end()}, {}, 4.0};
      const CascadeBound c = cascaded_risk_bound(spec);
      std::cout << std::setw(10) << name;
      for (double r : c.per_level) std::cout << "  " << std::setw(10) << fmt(r);
      std::cout << "\n";
      for (std::size_t i = 0; i < 4; ++i) {
        v.check(std::abs(c.per_level[i + 1] - expected[i]) <= 1e-3,
                name + " rho_" + std::to_string(i + 2) + " " + fmt(c.per_level[i + 1]) + " vs " + fmt(expected[i]));
      }
    };
    row("road", reference::kRoadEta, reference::kRoadMinRisk);
    row("collision", reference::kCollisionEta, reference::kCollisionMinRisk);
  } else if (table == "fig3") {
    const BatchResult s = batch_for(config_path(config_dir, "robot_scbf.cfg"), {}, o, "fig3_scbf");
    const BatchResult r = batch_for(config_path(config_dir, "robot_racbf.cfg"), {}, o, "fig3_racbf");
    std::cout << "median max B: S-CBF " << fmt(s.median_max_barrier(0)) << ", RA-CBF " << fmt(r.median_max_barrier(0))
              << "\n";
    const auto hs = max_barrier_histogram(s, 0, 20);
    const auto hr = max_barrier_histogram(r, 0, 20);
    std::cout << "bin_lo  scbf  racbf\n";
    for (std::size_t i = 0; i < hs.size(); ++i) std::cout << fmt(i / 20.0) << "  " << hs[i] << "  " << hr[i] << "\n";
    v.check(r.median_max_barrier(0) > s.median_max_barrier(0), "RA-CBF median max B exceeds S-CBF");
  } else {
    throw ConfigError("unknown table '" + table + "' (expected I, II, IV or fig3)");
  }
  if (!v.failures.empty()) {
    std::cout << v.failures.size() << " check(s) failed\n";
    return kExitAcceptance;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware control barrier function toolkit"};
  app.require_subcommand(1);

  BoundsOptions bo;
  auto* bounds = app.add_subcommand("bounds", "evaluate a closed-form risk bound");
  bounds->add_option("kind", bo.kind, "scbf | racbf-min | racbf-h | thm3 | cascade | wiener")->required();
  bounds->add_option("--alpha", bo.alpha);
  bounds->add_option("--beta", bo.beta);
  bounds->add_option("--gamma", bo.gamma);
  bounds->add_option("--eta", bo.eta);
  bounds->add_option("--T", bo.horizon);
  bounds->add_option("--I", bo.integral, "accumulated generator integral");
  bounds->add_option("--rho-d", bo.rho_d);
  bounds->add_option("--gap", bo.gap, "level gap (default 1 - gamma)");
  bounds->add_option("--a", bo.level, "crossing level");
  bounds->add_option("--levels", bo.levels)->delimiter(',');
  bounds->add_option("--etas", bo.etas)->delimiter(',');
  bounds->add_option("--budgets", bo.budgets, "per-level rho_d")->delimiter(',');

  RunOptions so;
  int trajectory = -1;
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo batch");
  add_run_options(simulate, so, true);
  simulate->add_option("--trajectory", trajectory, "also export trajectory and filter log of this trial");

  RunOptions eo;
  auto* eta = app.add_subcommand("estimate-eta", "estimate per-level eta by simulation");
  add_run_options(eta, eo, true);

  RunOptions ro;
  std::string table;
  std::string config_dir = "configs";
  auto* reproduce = app.add_subcommand("reproduce", "reproduce a reference table");
  reproduce->add_option("table", table, "I | II | IV | fig3")->required();
  reproduce->add_option("--configs", config_dir, "directory with the bundled configs");
  reproduce->add_option("--set", ro.overrides, "override applied to every batch")->take_all();
  reproduce->add_option("-N,--trials", ro.trials);
  reproduce->add_option("--workers", ro.workers);
  reproduce->add_option("--out", ro.out);

  RunOptions vo;
  auto* validate = app.add_subcommand("validate", "run eager checks on a config");
  add_run_options(validate, vo, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*bounds) return run_bounds(bo);
    if (*simulate) return run_simulate(so, trajectory);
    if (*eta) return run_estimate_eta(eo);
    if (*reproduce) return run_reproduce(table, config_dir, ro);
    if (*validate) return run_validate(vo);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
