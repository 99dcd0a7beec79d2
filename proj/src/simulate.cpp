#include "riskgate/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "riskgate/rng.hpp"

namespace riskgate {

std::vector<double> TrajectoryRecord::max_barrier() const {
  std::vector<double> out(static_cast<std::size_t>(barrier_values.rows()), -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < barrier_values.rows(); ++i) out[i] = barrier_values.row(i).maxCoeff();
  return out;
}

TrajectoryRecord simulate_trial(const SdeModel& model, Controller& controller,
                                const std::vector<BarrierSpec>& barriers, const Vector& x0,
                                const TrialConfig& config) {
  if (!(config.dt > 0.0) || config.dt > config.horizon) throw ContractViolation("simulate_trial: need 0 < dt <= T");
  if (x0.size() != model.n) throw ContractViolation("simulate_trial: initial state has wrong length");
  const auto steps = static_cast<Eigen::Index>(std::llround(config.horizon / config.dt));
  const auto nb = static_cast<Eigen::Index>(barriers.size());

  TrajectoryRecord rec;
  rec.seed = config.seed;
  rec.time.resize(steps + 1);
  rec.states.resize(model.n, steps + 1);
  rec.controls = Matrix::Zero(model.m, steps + 1);
  rec.barrier_values.resize(nb, steps + 1);
  for (const auto& b : barriers) rec.barrier_names.push_back(b.name);

  for (Eigen::Index j = 0; j < nb; ++j) {
    if (!(barriers[j].value(x0) < 1.0)) {
      throw ContractViolation("simulate_trial: initial state violates barrier '" + barriers[j].name + "' (B >= 1)");
    }
  }

  Vector x = x0;
  Vector xi(model.q);
  Vector last_u = Vector::Zero(model.m);
  for (Eigen::Index k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    rec.time[k] = t;
    rec.states.col(k) = x;
    const std::vector<double> running = controller.integrals();
    if (k == 0 && !running.empty()) rec.integrals.resize(static_cast<Eigen::Index>(running.size()), steps + 1);
    for (std::size_t j = 0; j < running.size(); ++j) rec.integrals(static_cast<Eigen::Index>(j), k) = running[j];

    for (Eigen::Index j = 0; j < nb; ++j) {
      const double value = barriers[j].value(x);
      rec.barrier_values(j, k) = value;
      if (!rec.stopped && value >= 1.0) {
        rec.stopped = true;
        rec.tau = t;
        rec.exit_barrier = static_cast<int>(j);
      }
    }
    if (rec.stopped) {
      // Stopped process: freeze everything from tau on.
      for (Eigen::Index r = k + 1; r <= steps; ++r) {
        rec.time[r] = static_cast<double>(r) * config.dt;
        rec.states.col(r) = x;
        rec.barrier_values.col(r) = rec.barrier_values.col(k);
        if (rec.integrals.size() > 0) rec.integrals.col(r) = rec.integrals.col(k);
      }
      break;
    }
    if (k == steps) {
      rec.controls.col(k) = last_u;
      break;
    }

    ControlDecision decision = controller.decide(t, x);
    if (decision.u.size() != model.m) throw ContractViolation("controller returned a control of wrong length");
    if (decision.infeasible) ++rec.infeasible_steps;
    for (Eigen::Index c = 0; c < model.q; ++c) {
      xi[c] = normal_draw(config.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(c));
    }
    Vector next = euler_maruyama_step(evaluate(model, x), x, decision.u, config.dt, xi);
    controller.commit(t, x, decision.u, config.dt);
    rec.controls.col(k) = decision.u;
    last_u = decision.u;
    x = std::move(next);
  }
  return rec;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record) {
  out << "t";
  for (Eigen::Index i = 0; i < record.states.rows(); ++i) out << ",x_" << i;
  for (Eigen::Index i = 0; i < record.controls.rows(); ++i) out << ",u_" << i;
  for (const auto& name : record.barrier_names) out << ",B_" << name;
  out << ",stopped,tau\n";
  out.precision(17);
  for (std::size_t k = 0; k < record.time.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    out << record.time[k];
    for (Eigen::Index i = 0; i < record.states.rows(); ++i) out << ',' << record.states(i, col);
    for (Eigen::Index i = 0; i < record.controls.rows(); ++i) out << ',' << record.controls(i, col);
    for (Eigen::Index i = 0; i < record.barrier_values.rows(); ++i) out << ',' << record.barrier_values(i, col);
    const bool stopped_here = record.tau.has_value() && record.time[k] >= *record.tau;
    out << ',' << (stopped_here ? 1 : 0) << ',';
    if (record.tau) out << *record.tau;
    out << '\n';
  }
}

}  // namespace riskgate
