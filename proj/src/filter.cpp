#include "riskgate/filter.hpp"

#include <cmath>
#include <ostream>

namespace riskgate {

ConstraintRow assemble_scbf_row(const GeneratorSplit& split, double barrier_value, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw ContractViolation("S-CBF gains must be >= 0");
  return {split.control_row, split.drift_part + alpha * barrier_value - beta, 0.0, "scbf"};
}

ConstraintRow assemble_scbf_row(const SdeModel& model, const BarrierSpec& barrier, const Vector& x, double alpha,
                                double beta) {
  ConstraintRow row = assemble_scbf_row(generator_decomposition(model, barrier, x), barrier.value(x), alpha, beta);
  row.label = barrier.name;
  return row;
}

RiskParams LevelPlan::params(int level) const {
  return {levels.at(0), etas.at(level - 1), horizon, rho_d.at(level - 1)};
}

void LevelPlan::validate() const {
  if (rho_d.size() != etas.size()) throw ContractViolation("RA-CBF plan needs one rho_d per level");
  if (!(k_alpha > 0.0)) throw ContractViolation("RA-CBF class-K gain must be > 0");
  cascade().validate();
}

int occupied_level(const std::vector<double>& levels, double barrier_value) {
  const int top = static_cast<int>(levels.size()) - 1;
  for (int i = 1; i < top; ++i) {
    if (barrier_value < levels[i]) return i;
  }
  return top;
}

double level_budget(const LevelPlan& plan, const RacbfBarrierState& state) {
  const int level = state.level;
  return plan.gap(level) -
         racbf_budget_offset(plan.gap(level), plan.etas.at(level - 1), plan.horizon, plan.rho_d.at(level - 1)) -
         state.integral;
}

ConstraintRow assemble_racbf_row(const GeneratorSplit& split, const LevelPlan& plan, const RacbfBarrierState& state) {
  const double h = level_budget(plan, state);
  return {split.control_row, split.drift_part - plan.k_alpha * h, plan.soft ? -1.0 : 0.0, "racbf"};
}

ConstraintRow assemble_racbf_row(const SdeModel& model, const BarrierSpec& barrier, const Vector& x,
                                 const RacbfBarrierState& state, const LevelPlan& plan) {
  ConstraintRow row = assemble_racbf_row(generator_decomposition(model, barrier, x), plan, state);
  row.label = barrier.name;
  return row;
}

bool refresh_level(RacbfBarrierState& state, const LevelPlan& plan, double barrier_value, double t) {
  const int level = occupied_level(plan.levels, barrier_value);
  if (level == state.level) return false;
  state.transitions.push_back({t, state.level, level, state.integral});
  state.level = level;
  state.integral = 0.0;
  state.entry_time = t;
  state.entry_integral = 0.0;
  return true;
}

void update_integrator(RacbfBarrierState& state, double generator_value, double dt) {
  state.integral += generator_value * dt;
}

void update_integrator(RacbfBarrierState& state, const SdeModel& model, const BarrierSpec& barrier,
                       const Vector& x, const Vector& u_applied, double dt) {
  update_integrator(state, generator(model, barrier, x, u_applied), dt);
}

CbfFilterController::CbfFilterController(const SdeModel& model, const std::vector<BarrierSpec>& barriers,
                                         std::vector<FilterRule> rules, NominalLaw nominal, FilterSettings settings)
    : model_(model),
      barriers_(barriers),
      rules_(std::move(rules)),
      nominal_(std::move(nominal)),
      settings_(std::move(settings)) {
  if (rules_.size() != barriers_.size()) throw ContractViolation("one filter rule per barrier is required");
  state_.barriers.resize(barriers_.size());
  for (std::size_t j = 0; j < rules_.size(); ++j) {
    if (rules_[j].racbf) {
      rules_[j].racbf->validate();
      state_.barriers[j].level = 1;
    }
  }
  splits_.resize(barriers_.size());
}

ControlDecision CbfFilterController::decide(double t, const Vector& x) {
  const ModelEval eval = evaluate(model_, x);
  CbfQpProblem qp;
  qp.nominal = nominal_(t, x);
  qp.lower = settings_.lower;
  qp.upper = settings_.upper;
  qp.slack_weight = settings_.slack_weight;

  std::vector<double> budgets(barriers_.size(), 0.0);
  for (std::size_t j = 0; j < barriers_.size(); ++j) {
    const BarrierSpec& barrier = barriers_[j];
    splits_[j] = generator_decomposition(eval, barrier, x);
    const FilterRule& rule = rules_[j];
    if (rule.scbf) {
      ConstraintRow row = assemble_scbf_row(splits_[j], barrier.value(x), rule.scbf->alpha, rule.scbf->beta);
      if (rule.scbf->soft) row.c = -1.0;
      row.label = barrier.name;
      qp.rows.push_back(std::move(row));
    } else if (rule.racbf) {
      refresh_level(state_.barriers[j], *rule.racbf, barrier.value(x), t);
      ConstraintRow row = assemble_racbf_row(splits_[j], *rule.racbf, state_.barriers[j]);
      budgets[j] = level_budget(*rule.racbf, state_.barriers[j]);
      row.label = barrier.name;
      qp.rows.push_back(std::move(row));
    }
  }

  last_ = solve_cbf_qp(qp);
  if (settings_.debug) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < barriers_.size(); ++j) {
      if (!rules_[j].scbf && !rules_[j].racbf) continue;
      debug_.push_back({t, barriers_[j].name, state_.barriers[j].level, state_.barriers[j].integral, budgets[j],
                        qp.rows[r].b, last_.status, last_.delta});
      ++r;
    }
  }
  return {last_.u, last_.status == QpStatus::infeasible};
}

void CbfFilterController::commit(double /*t*/, const Vector& /*x*/, const Vector& u, double dt) {
  for (std::size_t j = 0; j < barriers_.size(); ++j) {
    update_integrator(state_.barriers[j], splits_[j].drift_part + splits_[j].control_row.dot(u), dt);
  }
}

std::vector<double> CbfFilterController::integrals() const {
  std::vector<double> out;
  out.reserve(state_.barriers.size());
  for (const auto& s : state_.barriers) out.push_back(s.integral);
  return out;
}

void write_filter_debug_csv(std::ostream& out, const std::vector<FilterDebugRow>& rows) {
  out << "t,barrier,level,I_L,h,b,status,delta\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.t << ',' << r.barrier << ',' << r.level << ',' << r.integral << ',' << r.h << ',' << r.b << ','
        << to_string(r.status) << ',' << r.delta << '\n';
  }
}

}  // namespace riskgate
