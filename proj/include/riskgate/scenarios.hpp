#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskgate/barrier.hpp"
#include "riskgate/filter.hpp"
#include "riskgate/models.hpp"
#include "riskgate/simulate.hpp"

namespace riskgate {

using Json = nlohmann::ordered_json;

// ---- barriers -------------------------------------------------------------

// B(z) = (x^2 + y^2) / R^2 on the planar state.
BarrierSpec robot_barrier(double radius = 1.0, double gamma = 0.5);

// Lane band with a constant-angle on-ramp. Left of merge_x the centre line
// rises at ramp_angle and meets lane_center at merge_x; from merge_x on the
// road is straight. With merge_x = +inf the whole road is the ramp line
// through (0, lane_center).
struct RoadGeometry {
  double ramp_angle = 0.0;  // rad
  double merge_x = 0.0;
  double lane_center = 0.0;
  double lane_width = 3.0;
  std::vector<double> previews{0.0, 1.0};  // s

  static RoadGeometry straight(double theta, double lane_width, double lane_center);
  bool on_ramp(double x) const { return x < merge_x; }
  double angle(double x) const { return on_ramp(x) ? ramp_angle : 0.0; }
  double centre(double x) const;
  double half_width(double x) const;  // vertical half width w_l / (2 cos theta)
};

// h_r = sum over previews tau of  m^2 - d_tau^2, where d_tau is the vertical
// offset of the previewed point p + p_dot tau from the centre line at that
// point and m the half width there. Returned for the bicycle block at `ego`.
double road_margin(const RoadGeometry& road, const double* z);

// B_r = exp(-h_r) over the ego block starting at state index `ego`.
BarrierSpec road_barrier(const RoadGeometry& road, int ego = 0, const std::string& name = "road");

struct CollisionParams {
  double d_min = 4.0;      // m
  double horizon = 5.0;    // s, cap on the closest-approach time
  double relax = 0.1;      // weight of the present-distance term
  double length = 1.0;     // m, h is divided by length^2
  double lateral_weight = 1.0;  // y offsets are multiplied by this; 1 keeps the Euclidean form
};

// h = (|dp + dv tau*|^2 - d^2 + relax (|dp|^2 - d^2)) / length^2 with
// tau* = clamp(-dp.dv / |dv|^2, 0, horizon), dp and dv the relative position
// and velocity of `other` seen from `ego`, their y components scaled by
// lateral_weight.
double collision_margin(const CollisionParams& params, const double* ego, const double* other);

// Unclamped tau* in the weighted coordinates (0 when the relative speed
// vanishes). h is only C1 where tau* crosses 0 or horizon.
double collision_closest_time(const CollisionParams& params, const double* ego, const double* other);

// B = exp(-h) over the two bicycle blocks starting at `ego` and `other`.
BarrierSpec collision_barrier(const CollisionParams& params, int ego, int other, const std::string& name);

// ---- configuration --------------------------------------------------------

// Built-in defaults for a scenario kind ("robot", "merge", "wiener").
Json default_config(const std::string& kind);

// Overlays `user` on the defaults of its "scenario" kind. Keys that are not
// in the defaults are rejected with ConfigError.
Json resolve_config(const Json& user);
Json load_config(const std::string& path);

// Applies one "dotted.path=value" override to a resolved config. The path
// must already exist; the value is parsed as JSON and falls back to a string.
void apply_override(Json& config, const std::string& assignment);

// ---- scenarios ------------------------------------------------------------

struct TrialInstance {
  SdeModel model;
  std::vector<BarrierSpec> barriers;
  Vector x0;
  std::unique_ptr<Controller> controller;
};

struct CheckResult {
  std::string module;
  std::string check;
  bool ok = true;
  std::string detail;
};

struct RiskPrediction {
  std::string formula;
  double value = 1.0;  // bound the scenario claims for its measured risk
  Json detail;
};

class Scenario {
 public:
  virtual ~Scenario() = default;

  const Json& config() const { return config_; }
  std::string kind() const { return config_.at("scenario"); }
  std::string name() const { return config_.at("name"); }
  double horizon() const { return config_.at("mc").at("T"); }
  double dt() const { return config_.at("mc").at("dt"); }
  int trials() const { return config_.at("mc").at("N"); }
  std::uint64_t base_seed() const { return config_.at("mc").at("seed"); }
  TrialConfig trial_config(std::uint64_t seed) const { return {horizon(), dt(), seed}; }

  // Fresh model, barriers, initial state and controller for one trial. The
  // controller refers to the instance's own model and barriers.
  virtual std::unique_ptr<TrialInstance> instantiate(std::uint64_t trial_seed, bool debug = false) const = 0;

  // Outcome tag of a finished trial; "unsafe" whenever the process exited.
  virtual std::string classify(const TrajectoryRecord& record, const TrialInstance& trial) const;

  virtual std::vector<std::string> barrier_names() const = 0;

  // Upper sub-level edges mu_1..mu_k used for eta estimation, per barrier.
  virtual std::vector<std::vector<double>> eta_levels() const = 0;

  virtual RiskPrediction predicted() const = 0;

  // Scenario invariants and derivative oracles; nothing is simulated beyond
  // deterministic checks.
  virtual std::vector<CheckResult> validate() const = 0;

 protected:
  explicit Scenario(Json config) : config_(std::move(config)) {}
  Json config_;
};

// Builds a scenario from a resolved config. Admissibility of every risk
// budget is checked here (AdmissibilityError); with `check` set, the
// remaining validate() checks run too and the first failure is thrown as
// ConfigError.
std::shared_ptr<const Scenario> build_scenario(const Json& config, bool check = true);

// Risk budgets of one barrier entry turned into a level plan whose first
// level starts at gamma. Levels at or below gamma are skipped.
LevelPlan make_level_plan(double gamma, const std::vector<double>& upper_levels, const std::vector<double>& etas,
                          const std::vector<double>& rho_d, double horizon, double k_alpha, bool soft);

}  // namespace riskgate
