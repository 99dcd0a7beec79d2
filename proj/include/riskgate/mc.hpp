#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskgate/scenarios.hpp"

namespace riskgate {

struct TrialOutcome {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  bool stopped = false;
  std::optional<double> tau;
  std::optional<int> exit_barrier;
  std::vector<double> max_barrier;  // per barrier, over [0, T]
  int infeasible_steps = 0;
  std::string outcome;
};

struct BatchResult {
  std::string scenario;
  Json config;
  int trials = 0;
  std::uint64_t base_seed = 0;
  int unsafe = 0;
  double measured_rho = 0.0;
  std::array<double, 2> wilson{0.0, 1.0};
  long long infeasible_steps = 0;
  int trials_with_infeasible = 0;
  std::map<std::string, int> outcomes;
  std::vector<std::string> barrier_names;
  std::vector<TrialOutcome> per_trial;
  RiskPrediction predicted;

  // Median over trials of the per-trial max of barrier `b`.
  double median_max_barrier(std::size_t b) const;
};

// Wilson score interval for k successes in n trials (95% by default).
std::array<double, 2> wilson_interval(long long k, long long n, double z = 1.959963984540054);

// `requested` > 0 wins; otherwise RISKGATE_WORKERS, otherwise the hardware
// concurrency.
int resolve_workers(int requested);

// Runs trials 0..N-1 with seeds derive_seed(base_seed, i) on `workers`
// threads. Results are stored by trial index, so the batch does not depend
// on scheduling. An integration fault aborts the batch with the trial index
// and seed in the message.
BatchResult run_batch(const Scenario& scenario, int trials, std::uint64_t base_seed, int workers);

struct EtaEstimate {
  std::vector<std::string> barriers;
  std::vector<std::vector<double>> levels;                // upper edges mu_1..mu_k per barrier
  std::vector<std::vector<std::optional<double>>> eta;    // absent when a level was never visited
  int trials = 0;
  std::vector<std::string> warnings;
};

// eta_i = max |L_sigma B| over every visited state with B < mu_i, across all
// trials and all grid times (before exit).
EtaEstimate estimate_eta(const Scenario& scenario, int trials, std::uint64_t base_seed, int workers);

// Machine-readable batch summary. Contains nothing that depends on the worker
// count or wall clock, so equal inputs give byte-identical output.
Json batch_json(const BatchResult& batch);

// trial, seed, barrier, maxB, stopped, tau
void write_max_barrier_csv(std::ostream& out, const BatchResult& batch);
// trial, seed, outcome, infeasible_steps
void write_outcomes_csv(std::ostream& out, const BatchResult& batch);
// barrier, level, mu, eta
void write_eta_csv(std::ostream& out, const EtaEstimate& estimate);
Json eta_json(const EtaEstimate& estimate);

// Predicted-vs-measured rows for a set of batches, plus outcome rates.
Json summarize(const std::vector<BatchResult>& batches);
void write_summary_csv(std::ostream& out, const Json& summary);

// Histogram of per-trial max B for one barrier on [0, upper]; the last bin
// also collects values above `upper`. Throws ContractViolation on an empty
// batch.
std::vector<int> max_barrier_histogram(const BatchResult& batch, std::size_t barrier, int bins, double upper = 1.0);

// results/<scenario>/<UTC timestamp>, created on demand.
std::string make_results_dir(const std::string& root, const std::string& scenario);

}  // namespace riskgate
