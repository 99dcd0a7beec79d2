#include "riskgate/mc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "riskgate/rng.hpp"

namespace riskgate {

double BatchResult::median_max_barrier(std::size_t b) const {
  if (per_trial.empty()) throw ContractViolation("median of an empty batch");
  std::vector<double> v;
  v.reserve(per_trial.size());
  for (const auto& t : per_trial) v.push_back(t.max_barrier.at(b));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::array<double, 2> wilson_interval(long long k, long long n, double z) {
  if (n <= 0 || k < 0 || k > n) throw ContractViolation("wilson_interval: need 0 <= k <= n, n > 0");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  // the endpoints are exact at k = 0 and k = n; rounding would leave ~1e-19
  return {k == 0 ? 0.0 : std::max(0.0, centre - half), k == n ? 1.0 : std::min(1.0, centre + half)};
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RISKGATE_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(i) for i in [0, n) on `workers` threads; the first exception
// stops the pool and is rethrown after every thread has joined.
template <typename Body>
void parallel_for(int n, int workers, Body body) {
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    while (!failed.load()) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  const int count = std::max(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

[[noreturn]] void abort_trial(int index, std::uint64_t seed, const std::string& what) {
  throw std::runtime_error("trial " + std::to_string(index) + " (seed " + std::to_string(seed) + ") failed: " + what);
}

}  // namespace

BatchResult run_batch(const Scenario& scenario, int trials, std::uint64_t base_seed, int workers) {
  if (trials < 1) throw ContractViolation("run_batch: N must be >= 1");
  BatchResult batch;
  batch.scenario = scenario.name();
  batch.config = scenario.config();
  batch.config["mc"]["N"] = trials;
  batch.config["mc"]["seed"] = base_seed;
  batch.trials = trials;
  batch.base_seed = base_seed;
  batch.barrier_names = scenario.barrier_names();
  batch.predicted = scenario.predicted();
  batch.per_trial.resize(static_cast<std::size_t>(trials));

  parallel_for(trials, resolve_workers(workers), [&](int i) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    try {
      auto trial = scenario.instantiate(seed);
      const TrajectoryRecord rec =
          simulate_trial(trial->model, *trial->controller, trial->barriers, trial->x0, scenario.trial_config(seed));
      TrialOutcome& out = batch.per_trial[static_cast<std::size_t>(i)];
      out.index = static_cast<std::uint64_t>(i);
      out.seed = seed;
      out.stopped = rec.stopped;
      out.tau = rec.tau;
      out.exit_barrier = rec.exit_barrier;
      out.max_barrier = rec.max_barrier();
      out.infeasible_steps = rec.infeasible_steps;
      out.outcome = scenario.classify(rec, *trial);
    } catch (const IntegrationFault& e) {
      std::ostringstream s;
      s << e.what() << " at state [" << e.state().transpose() << "]";
      abort_trial(i, seed, s.str());
    } catch (const std::exception& e) {
      abort_trial(i, seed, e.what());
    }
  });

  // Ordered reduction.
  for (const TrialOutcome& t : batch.per_trial) {
    batch.unsafe += t.stopped ? 1 : 0;
    batch.infeasible_steps += t.infeasible_steps;
    batch.trials_with_infeasible += t.infeasible_steps > 0 ? 1 : 0;
    ++batch.outcomes[t.outcome];
  }
  batch.measured_rho = static_cast<double>(batch.unsafe) / trials;
  batch.wilson = wilson_interval(batch.unsafe, trials);
  return batch;
}

EtaEstimate estimate_eta(const Scenario& scenario, int trials, std::uint64_t base_seed, int workers) {
  if (trials < 1) throw ContractViolation("estimate_eta: N must be >= 1");
  EtaEstimate est;
  est.trials = trials;
  est.barriers = scenario.barrier_names();
  est.levels = scenario.eta_levels();
  if (est.barriers.empty()) throw ContractViolation("estimate_eta: scenario has no barrier");
  using Table = std::vector<std::vector<double>>;
  std::vector<Table> partial(static_cast<std::size_t>(trials));

  parallel_for(trials, resolve_workers(workers), [&](int i) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    auto trial = scenario.instantiate(seed);
    const TrajectoryRecord rec =
        simulate_trial(trial->model, *trial->controller, trial->barriers, trial->x0, scenario.trial_config(seed));
    Table table;
    for (const auto& lv : est.levels) table.emplace_back(lv.size(), -1.0);
    const Eigen::Index last = rec.tau ? static_cast<Eigen::Index>(std::llround(*rec.tau / scenario.dt()))
                                      : rec.states.cols() - 1;
    for (Eigen::Index k = 0; k <= last; ++k) {
      const Vector x = rec.states.col(k);
      const ModelEval eval = evaluate(trial->model, x);
      for (std::size_t b = 0; b < trial->barriers.size(); ++b) {
        const double value = rec.barrier_values(static_cast<Eigen::Index>(b), k);
        if (!(value < 1.0)) continue;
        const double norm = sigma_lie(eval, trial->barriers[b], x).norm();
        for (std::size_t l = 0; l < est.levels[b].size(); ++l) {
          if (value < est.levels[b][l]) table[b][l] = std::max(table[b][l], norm);
        }
      }
    }
    partial[static_cast<std::size_t>(i)] = std::move(table);
  });

  est.eta.resize(est.barriers.size());
  for (std::size_t b = 0; b < est.barriers.size(); ++b) {
    est.eta[b].assign(est.levels[b].size(), std::nullopt);
    for (std::size_t l = 0; l < est.levels[b].size(); ++l) {
      double best = -1.0;
      for (const Table& t : partial) best = std::max(best, t[b][l]);
      if (best >= 0.0) {
        est.eta[b][l] = best;
      } else {
        est.warnings.push_back("barrier '" + est.barriers[b] + "' never visited level " + std::to_string(l + 1));
      }
    }
  }
  return est;
}

Json batch_json(const BatchResult& b) {
  Json j;
  j["scenario"] = b.scenario;
  j["N"] = b.trials;
  j["base_seed"] = b.base_seed;
  j["unsafe"] = b.unsafe;
  j["measured_rho"] = b.measured_rho;
  j["wilson95"] = {b.wilson[0], b.wilson[1]};
  j["predicted"] = {{"formula", b.predicted.formula}, {"value", b.predicted.value}, {"detail", b.predicted.detail}};
  j["infeasible_steps"] = b.infeasible_steps;
  j["trials_with_infeasible_steps"] = b.trials_with_infeasible;
  Json outcomes = Json::object();
  for (const auto& [tag, count] : b.outcomes) outcomes[tag] = count;
  j["outcomes"] = outcomes;
  Json medians = Json::object();
  for (std::size_t i = 0; i < b.barrier_names.size(); ++i) medians[b.barrier_names[i]] = b.median_max_barrier(i);
  j["median_max_barrier"] = medians;
  j["config"] = b.config;
  return j;
}

void write_max_barrier_csv(std::ostream& out, const BatchResult& batch) {
  out << "trial,seed,barrier,maxB,stopped,tau\n";
  out << std::setprecision(17);
  for (const TrialOutcome& t : batch.per_trial) {
    for (std::size_t b = 0; b < batch.barrier_names.size(); ++b) {
      out << t.index << ',' << t.seed << ',' << batch.barrier_names[b] << ',' << t.max_barrier[b] << ','
          << (t.stopped ? 1 : 0) << ',';
      if (t.tau) out << *t.tau;
      out << '\n';
    }
  }
}

void write_outcomes_csv(std::ostream& out, const BatchResult& batch) {
  out << "trial,seed,outcome,infeasible_steps\n";
  for (const TrialOutcome& t : batch.per_trial) {
    out << t.index << ',' << t.seed << ',' << t.outcome << ',' << t.infeasible_steps << '\n';
  }
}

void write_eta_csv(std::ostream& out, const EtaEstimate& est) {
  out << "barrier,level,mu,eta\n";
  out << std::setprecision(17);
  for (std::size_t b = 0; b < est.barriers.size(); ++b) {
    for (std::size_t l = 0; l < est.levels[b].size(); ++l) {
      out << est.barriers[b] << ',' << l + 1 << ',' << est.levels[b][l] << ',';
      if (est.eta[b][l]) out << *est.eta[b][l];
      out << '\n';
    }
  }
}

Json eta_json(const EtaEstimate& est) {
  Json j;
  j["N"] = est.trials;
  Json rows = Json::array();
  for (std::size_t b = 0; b < est.barriers.size(); ++b) {
    Json etas = Json::array();
    for (const auto& e : est.eta[b]) etas.push_back(e ? Json(*e) : Json(nullptr));
    rows.push_back({{"barrier", est.barriers[b]}, {"levels", est.levels[b]}, {"eta", etas}});
  }
  j["barriers"] = rows;
  j["warnings"] = est.warnings;
  return j;
}

Json summarize(const std::vector<BatchResult>& batches) {
  if (batches.empty()) throw ContractViolation("summarize: no batches");
  Json rows = Json::array();
  for (const BatchResult& b : batches) {
    Json row;
    row["scenario"] = b.scenario;
    row["formula"] = b.predicted.formula;
    row["predicted_rho"] = b.predicted.value;
    row["measured_rho"] = b.measured_rho;
    row["wilson95"] = {b.wilson[0], b.wilson[1]};
    row["N"] = b.trials;
    row["gamma"] = b.predicted.detail.contains("gamma") ? b.predicted.detail["gamma"] : Json(nullptr);
    row["eta"] = b.predicted.detail.contains("eta") ? b.predicted.detail["eta"] : Json(nullptr);
    Json rates = Json::object();
    for (const auto& [tag, count] : b.outcomes) rates[tag] = static_cast<double>(count) / b.trials;
    row["outcome_rates"] = rates;
    if (!b.barrier_names.empty()) row["median_max_barrier"] = b.median_max_barrier(0);
    rows.push_back(row);
  }
  return {{"rows", rows}};
}

void write_summary_csv(std::ostream& out, const Json& summary) {
  out << "scenario,formula,predicted_rho,measured_rho,wilson_lo,wilson_hi,N,median_maxB\n";
  out << std::setprecision(10);
  for (const Json& r : summary.at("rows")) {
    out << r.at("scenario").get<std::string>() << ',' << r.at("formula").get<std::string>() << ','
        << r.at("predicted_rho").get<double>() << ',' << r.at("measured_rho").get<double>() << ','
        << r.at("wilson95")[0].get<double>() << ',' << r.at("wilson95")[1].get<double>() << ','
        << r.at("N").get<int>() << ',';
    if (r.contains("median_max_barrier")) out << r.at("median_max_barrier").get<double>();
    out << '\n';
  }
}

std::vector<int> max_barrier_histogram(const BatchResult& batch, std::size_t barrier, int bins, double upper) {
  if (batch.per_trial.empty()) throw ContractViolation("histogram of a zero-trial batch");
  if (bins < 1 || !(upper > 0.0)) throw ContractViolation("histogram needs bins >= 1 and upper > 0");
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (const TrialOutcome& t : batch.per_trial) {
    const double v = std::max(0.0, t.max_barrier.at(barrier));
    const int bin = std::min(bins - 1, static_cast<int>(v / upper * bins));
    ++counts[static_cast<std::size_t>(bin)];
  }
  return counts;
}

std::string make_results_dir(const std::string& root, const std::string& scenario) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&t, &utc);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y%m%dT%H%M%S") << '_' << std::setw(3) << std::setfill('0') << ms << 'Z';
  const std::filesystem::path dir = std::filesystem::path(root) / scenario / stamp.str();
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace riskgate
