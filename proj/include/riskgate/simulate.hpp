#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "riskgate/barrier.hpp"
#include "riskgate/sde.hpp"

namespace riskgate {

struct ControlDecision {
  Vector u;
  bool infeasible = false;
};

// Feedback law queried once per grid point (zero-order hold). Instances are
// per-trial and single-owner; stateful laws (RA-CBF integrators) keep their
// state here.
class Controller {
 public:
  virtual ~Controller() = default;

  virtual ControlDecision decide(double t, const Vector& x) = 0;

  // Called once per step after `decide`, with the control actually applied.
  virtual void commit(double /*t*/, const Vector& /*x*/, const Vector& /*u*/, double /*dt*/) {}

  // Running integral of the generator per monitored barrier, if tracked.
  virtual std::vector<double> integrals() const { return {}; }
};

struct TrajectoryRecord {
  std::vector<double> time;     // uniform grid 0, dt, ..., T
  Matrix states;                // n x (K+1)
  Matrix controls;              // m x (K+1); the last column repeats the last applied control
  Matrix barrier_values;        // one row per monitored barrier
  Matrix integrals;             // one row per barrier; empty when the controller tracks none
  std::vector<std::string> barrier_names;
  bool stopped = false;
  std::optional<double> tau;    // first grid time with B >= 1 for some barrier
  std::optional<int> exit_barrier;
  int infeasible_steps = 0;
  std::uint64_t seed = 0;

  std::size_t steps() const { return time.size(); }
  // Largest value each barrier reached over the record.
  std::vector<double> max_barrier() const;
};

struct TrialConfig {
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

// Integrates the closed loop from x0 with Euler-Maruyama on the grid
// t_k = k dt and stops the process at the first grid point where any barrier
// reaches 1. Normal draws are keyed by (seed, step, channel), so identical
// inputs always reproduce the same record.
TrajectoryRecord simulate_trial(const SdeModel& model, Controller& controller,
                                const std::vector<BarrierSpec>& barriers, const Vector& x0,
                                const TrialConfig& config);

// CSV: t, x_0..x_{n-1}, u_0..u_{m-1}, B_<name>..., stopped, tau
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record);

}  // namespace riskgate
