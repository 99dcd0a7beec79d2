#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskgate/barrier.hpp"
#include "riskgate/qp.hpp"
#include "riskgate/risk.hpp"
#include "riskgate/simulate.hpp"

namespace riskgate {

// Stochastic CBF row: Gamma_B(x, u) <= -alpha B(x) + beta, i.e.
//   A = grad B . g,   b = drift_part + alpha B - beta.
ConstraintRow assemble_scbf_row(const GeneratorSplit& split, double barrier_value, double alpha, double beta);
ConstraintRow assemble_scbf_row(const SdeModel& model, const BarrierSpec& barrier, const Vector& x, double alpha,
                                double beta);

// RA-CBF settings for one barrier: sub-level cascade, per-level noise bound
// and risk budget, and the linear class-K gain.
struct LevelPlan {
  std::vector<double> levels;  // mu_0 = gamma < ... < mu_k = 1
  std::vector<double> etas;
  std::vector<double> rho_d;
  double horizon = 1.0;
  double k_alpha = 1.0;
  bool soft = false;

  int level_count() const { return static_cast<int>(levels.size()) - 1; }
  double gap(int level) const { return levels.at(level) - levels.at(level - 1); }
  CascadeSpec cascade() const { return {levels, etas, rho_d, horizon}; }
  RiskParams params(int level) const;
  // Throws ContractViolation / AdmissibilityError; called when a controller is built.
  void validate() const;
};

struct LevelTransition {
  double time = 0.0;
  int from = 0;
  int to = 0;
  double integral_before = 0.0;
};

// Integrator state of one RA-CBF barrier. `integral` is I_L accumulated since
// the last level change; it restarts at 0 whenever the occupied level moves
// (up or down).
struct RacbfBarrierState {
  double integral = 0.0;
  int level = 1;
  double entry_time = 0.0;
  double entry_integral = 0.0;
  std::vector<LevelTransition> transitions;
};

struct RacbfControllerState {
  std::vector<RacbfBarrierState> barriers;
};

// Smallest level index i >= 1 with B < mu_i (the top level when B >= 1).
int occupied_level(const std::vector<double>& levels, double barrier_value);

// h(I_L) for the occupied level: gap_i - sqrt(2) eta_i T erf^{-1}(1 - rho_d_i) - I_L.
double level_budget(const LevelPlan& plan, const RacbfBarrierState& state);

// RA-CBF row: Gamma_B(x, u) <= k_alpha h(I_L), i.e.
//   A = grad B . g,   b = drift_part - k_alpha h.
ConstraintRow assemble_racbf_row(const GeneratorSplit& split, const LevelPlan& plan, const RacbfBarrierState& state);
ConstraintRow assemble_racbf_row(const SdeModel& model, const BarrierSpec& barrier, const Vector& x,
                                 const RacbfBarrierState& state, const LevelPlan& plan);

// Re-evaluates the occupied level from the current barrier value; a change
// restarts the accumulator and is appended to `transitions`. Returns true on
// a transition.
bool refresh_level(RacbfBarrierState& state, const LevelPlan& plan, double barrier_value, double t);

// Left-endpoint update I_L += Gamma_B dt.
void update_integrator(RacbfBarrierState& state, double generator_value, double dt);
void update_integrator(RacbfBarrierState& state, const SdeModel& model, const BarrierSpec& barrier,
                       const Vector& x, const Vector& u_applied, double dt);

struct ScbfRule {
  double alpha = 0.0;
  double beta = 0.0;
  bool soft = false;
};

// Filter rule for one monitored barrier: none (monitor only), S-CBF or RA-CBF.
struct FilterRule {
  std::optional<ScbfRule> scbf;
  std::optional<LevelPlan> racbf;
};

struct FilterDebugRow {
  double t = 0.0;
  std::string barrier;
  int level = 0;
  double integral = 0.0;
  double h = 0.0;
  double b = 0.0;
  QpStatus status = QpStatus::optimal;
  double delta = 0.0;
};

using NominalLaw = std::function<Vector(double, const Vector&)>;

struct FilterSettings {
  Vector lower;
  Vector upper;
  double slack_weight = 1e4;
  bool debug = false;
};

// CBF-QP safety filter around a nominal law. One rule per monitored barrier.
class CbfFilterController : public Controller {
 public:
  CbfFilterController(const SdeModel& model, const std::vector<BarrierSpec>& barriers, std::vector<FilterRule> rules,
                      NominalLaw nominal, FilterSettings settings);

  ControlDecision decide(double t, const Vector& x) override;
  void commit(double t, const Vector& x, const Vector& u, double dt) override;
  std::vector<double> integrals() const override;

  const RacbfControllerState& state() const { return state_; }
  const std::vector<FilterDebugRow>& debug_rows() const { return debug_; }
  const CbfQpSolution& last_solution() const { return last_; }

 private:
  const SdeModel& model_;
  const std::vector<BarrierSpec>& barriers_;
  std::vector<FilterRule> rules_;
  NominalLaw nominal_;
  FilterSettings settings_;
  RacbfControllerState state_;
  std::vector<GeneratorSplit> splits_;
  CbfQpSolution last_;
  std::vector<FilterDebugRow> debug_;
};

// Per-step debug log: t, barrier, level, I_L, h, b, status, delta
void write_filter_debug_csv(std::ostream& out, const std::vector<FilterDebugRow>& rows);

}  // namespace riskgate
