#include "riskgate/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "riskgate/rng.hpp"

namespace riskgate {

// ---- barriers -------------------------------------------------------------

BarrierSpec robot_barrier(double radius, double gamma) {
  if (!(radius > 0.0)) throw ContractViolation("disk radius must be > 0");
  const double inv = 1.0 / (radius * radius);
  BarrierSpec b;
  b.name = "disk";
  b.support = {0, 1};
  b.value = [inv](const Vector& x) { return (x[0] * x[0] + x[1] * x[1]) * inv; };
  b.gradient = [inv](const Vector& x) -> Vector { return Eigen::Vector2d(2.0 * x[0] * inv, 2.0 * x[1] * inv); };
  b.hessian = [inv](const Vector&) -> Matrix { return 2.0 * inv * Matrix::Identity(2, 2); };
  b.gamma = gamma;
  return b;
}

RoadGeometry RoadGeometry::straight(double theta, double lane_width, double lane_center) {
  RoadGeometry g;
  g.ramp_angle = theta;
  g.merge_x = std::numeric_limits<double>::infinity();
  g.lane_center = lane_center;
  g.lane_width = lane_width;
  return g;
}

double RoadGeometry::centre(double x) const {
  if (!on_ramp(x)) return lane_center;
  // a straight ramp passes through (0, lane_center)
  const double anchor = std::isfinite(merge_x) ? merge_x : 0.0;
  return lane_center + (x - anchor) * std::tan(ramp_angle);
}

double RoadGeometry::half_width(double x) const { return lane_width / (2.0 * std::cos(angle(x))); }

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

struct ScalarDerivs {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

// h_r with gradient and Hessian over one bicycle block.
ScalarDerivs road_margin_derivs(const RoadGeometry& road, const double* z, bool derivs) {
  ScalarDerivs out;
  out.grad = Vector::Zero(5);
  out.hess = Matrix::Zero(5, 5);
  const PlanarVelocity pv = planar_velocity(z[kPsi], z[kV], z[kBeta]);
  for (double tau : road.previews) {
    const double px = z[kX] + tau * pv.w[0];
    const double py = z[kY] + tau * pv.w[1];
    const double slope = road.on_ramp(px) ? std::tan(road.ramp_angle) : 0.0;
    const double margin = road.half_width(px);
    const double d = py - road.centre(px);
    out.value += margin * margin - d * d;
    if (!derivs) continue;
    Vec5 dd = Vec5::Zero();
    dd[kX] = -slope;
    dd[kY] = 1.0;
    for (int j = 0; j < 3; ++j) dd[kPsi + j] = tau * (pv.jacobian[1][j] - slope * pv.jacobian[0][j]);
    Mat5 hd = Mat5::Zero();
    hd.bottomRightCorner<3, 3>() = tau * (pv.hessian[1] - slope * pv.hessian[0]);
    out.grad -= 2.0 * d * dd;
    out.hess -= 2.0 * (dd * dd.transpose() + d * hd);
  }
  return out;
}

// Relative-state map q = (dp, dv) over the joint block (ego 0..4, other 5..9).
struct RelativeState {
  Eigen::Vector2d dp;
  Eigen::Vector2d dv;
  Eigen::Matrix<double, 4, 10> jacobian = Eigen::Matrix<double, 4, 10>::Zero();
  std::array<Eigen::Matrix<double, 10, 10>, 2> dv_hessian;  // second derivatives of dv_x, dv_y
};

RelativeState relative_state(const double* ego, const double* other) {
  const PlanarVelocity we = planar_velocity(ego[kPsi], ego[kV], ego[kBeta]);
  const PlanarVelocity wo = planar_velocity(other[kPsi], other[kV], other[kBeta]);
  RelativeState r;
  r.dp = {other[kX] - ego[kX], other[kY] - ego[kY]};
  r.dv = {wo.w[0] - we.w[0], wo.w[1] - we.w[1]};
  r.jacobian(0, kX) = -1.0;
  r.jacobian(0, 5 + kX) = 1.0;
  r.jacobian(1, kY) = -1.0;
  r.jacobian(1, 5 + kY) = 1.0;
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 3; ++j) {
      r.jacobian(2 + k, kPsi + j) = -we.jacobian[k][j];
      r.jacobian(2 + k, 5 + kPsi + j) = wo.jacobian[k][j];
    }
    r.dv_hessian[k].setZero();
    r.dv_hessian[k].block<3, 3>(kPsi, kPsi) = -we.hessian[k];
    r.dv_hessian[k].block<3, 3>(5 + kPsi, 5 + kPsi) = wo.hessian[k];
  }
  return r;
}

// Closest-approach margin in q coordinates, before scaling.
struct MarginQ {
  double value = 0.0;
  Eigen::Vector4d grad = Eigen::Vector4d::Zero();
  Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
};

MarginQ euclidean_margin_q(const CollisionParams& p, const Eigen::Vector2d& dp, const Eigen::Vector2d& dv) {
  const double d2 = p.d_min * p.d_min;
  const double pp = dp.squaredNorm();
  const double pv = dp.dot(dv);
  const double vv = dv.squaredNorm();
  const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  MarginQ m;
  const double tau = vv > 1e-12 ? -pv / vv : 0.0;
  if (tau <= 0.0) {
    m.value = pp - d2;
    m.grad.head<2>() = 2.0 * dp;
    m.hess.topLeftCorner<2, 2>() = 2.0 * eye;
  } else if (tau >= p.horizon) {
    const double t = p.horizon;
    const Eigen::Vector2d r = dp + t * dv;
    m.value = r.squaredNorm() - d2;
    m.grad << 2.0 * r, 2.0 * t * r;
    m.hess.topLeftCorner<2, 2>() = 2.0 * eye;
    m.hess.topRightCorner<2, 2>() = 2.0 * t * eye;
    m.hess.bottomLeftCorner<2, 2>() = 2.0 * t * eye;
    m.hess.bottomRightCorner<2, 2>() = 2.0 * t * t * eye;
  } else {
    m.value = pp - pv * pv / vv - d2;
    m.grad.head<2>() = 2.0 * dp - 2.0 * pv / vv * dv;
    m.grad.tail<2>() = -2.0 * pv / vv * dp + 2.0 * pv * pv / (vv * vv) * dv;
    const Eigen::Matrix2d hpp = 2.0 * eye - 2.0 * dv * dv.transpose() / vv;
    const Eigen::Matrix2d hpv =
        -2.0 * (dv * dp.transpose() / vv + pv / vv * eye - 2.0 * pv / (vv * vv) * dv * dv.transpose());
    const Eigen::Matrix2d hvv = -2.0 * (dp * dp.transpose() / vv - 2.0 * pv / (vv * vv) * dp * dv.transpose()) +
                                2.0 * (2.0 * pv / (vv * vv) * dv * dp.transpose() + pv * pv / (vv * vv) * eye -
                                       4.0 * pv * pv / (vv * vv * vv) * dv * dv.transpose());
    m.hess.topLeftCorner<2, 2>() = hpp;
    m.hess.topRightCorner<2, 2>() = hpv;
    m.hess.bottomLeftCorner<2, 2>() = hpv.transpose();
    m.hess.bottomRightCorner<2, 2>() = 0.5 * (hvv + hvv.transpose());
  }
  // present-distance relaxation
  m.value += p.relax * (pp - d2);
  m.grad.head<2>() += 2.0 * p.relax * dp;
  m.hess.topLeftCorner<2, 2>() += 2.0 * p.relax * eye;
  const double scale = 1.0 / (p.length * p.length);
  m.value *= scale;
  m.grad *= scale;
  m.hess *= scale;
  return m;
}

// Lateral offsets are stretched by `lateral_weight` before the Euclidean form,
// so the keep-out region is an ellipse with semi-axes d_min and d_min / w.
MarginQ collision_margin_q(const CollisionParams& p, const Eigen::Vector2d& dp, const Eigen::Vector2d& dv) {
  const double w = p.lateral_weight;
  if (w == 1.0) return euclidean_margin_q(p, dp, dv);
  MarginQ m = euclidean_margin_q(p, Eigen::Vector2d(dp[0], w * dp[1]), Eigen::Vector2d(dv[0], w * dv[1]));
  const Eigen::Vector4d s(1.0, w, 1.0, w);
  m.grad = m.grad.cwiseProduct(s);
  m.hess = s.asDiagonal() * m.hess * s.asDiagonal();
  return m;
}

ScalarDerivs collision_margin_derivs(const CollisionParams& p, const double* ego, const double* other) {
  const RelativeState r = relative_state(ego, other);
  const MarginQ m = collision_margin_q(p, r.dp, r.dv);
  ScalarDerivs out;
  out.value = m.value;
  out.grad = r.jacobian.transpose() * m.grad;
  Matrix h = r.jacobian.transpose() * m.hess * r.jacobian;
  h += m.grad[2] * r.dv_hessian[0] + m.grad[3] * r.dv_hessian[1];
  out.hess = h;
  return out;
}

// B = exp(-h) and its derivatives from those of h.
void exp_barrier(ScalarDerivs& d) {
  const double b = std::exp(-d.value);
  d.hess = b * (d.grad * d.grad.transpose() - d.hess);
  d.grad *= -b;
  d.value = b;
}

std::vector<int> block_support(std::initializer_list<int> starts) {
  std::vector<int> s;
  for (int start : starts) {
    for (int j = 0; j < kBicycleDim; ++j) s.push_back(start + j);
  }
  return s;
}

}  // namespace

double road_margin(const RoadGeometry& road, const double* z) { return road_margin_derivs(road, z, false).value; }

BarrierSpec road_barrier(const RoadGeometry& road, int ego, const std::string& name) {
  if (!(road.lane_width > 0.0)) throw ContractViolation("lane width must be > 0");
  BarrierSpec b;
  b.name = name;
  b.support = block_support({ego});
  b.value = [road, ego](const Vector& x) { return std::exp(-road_margin(road, x.data() + ego)); };
  b.gradient = [road, ego](const Vector& x) -> Vector {
    ScalarDerivs d = road_margin_derivs(road, x.data() + ego, true);
    exp_barrier(d);
    return d.grad;
  };
  b.hessian = [road, ego](const Vector& x) -> Matrix {
    ScalarDerivs d = road_margin_derivs(road, x.data() + ego, true);
    exp_barrier(d);
    return d.hess;
  };
  return b;
}

double collision_margin(const CollisionParams& params, const double* ego, const double* other) {
  const Eigen::Vector2d dp(other[kX] - ego[kX], other[kY] - ego[kY]);
  const PlanarVelocity we = planar_velocity(ego[kPsi], ego[kV], ego[kBeta]);
  const PlanarVelocity wo = planar_velocity(other[kPsi], other[kV], other[kBeta]);
  const Eigen::Vector2d dv(wo.w[0] - we.w[0], wo.w[1] - we.w[1]);
  return collision_margin_q(params, dp, dv).value;
}

double collision_closest_time(const CollisionParams& params, const double* ego, const double* other) {
  const double w = params.lateral_weight;
  const PlanarVelocity we = planar_velocity(ego[kPsi], ego[kV], ego[kBeta]);
  const PlanarVelocity wo = planar_velocity(other[kPsi], other[kV], other[kBeta]);
  const Eigen::Vector2d dp(other[kX] - ego[kX], w * (other[kY] - ego[kY]));
  const Eigen::Vector2d dv(wo.w[0] - we.w[0], w * (wo.w[1] - we.w[1]));
  const double vv = dv.squaredNorm();
  return vv > 1e-12 ? -dp.dot(dv) / vv : 0.0;
}

BarrierSpec collision_barrier(const CollisionParams& params, int ego, int other, const std::string& name) {
  if (!(params.d_min > 0.0) || !(params.horizon >= 0.0) || !(params.length > 0.0) || !(params.lateral_weight > 0.0)) {
    throw ContractViolation("collision barrier needs d_min > 0, horizon >= 0, length > 0, lateral_weight > 0");
  }
  BarrierSpec b;
  b.name = name;
  b.support = block_support({ego, other});
  b.value = [params, ego, other](const Vector& x) {
    return std::exp(-collision_margin(params, x.data() + ego, x.data() + other));
  };
  b.gradient = [params, ego, other](const Vector& x) -> Vector {
    ScalarDerivs d = collision_margin_derivs(params, x.data() + ego, x.data() + other);
    exp_barrier(d);
    return d.grad;
  };
  b.hessian = [params, ego, other](const Vector& x) -> Matrix {
    ScalarDerivs d = collision_margin_derivs(params, x.data() + ego, x.data() + other);
    exp_barrier(d);
    return d.hess;
  };
  return b;
}

// ---- configuration --------------------------------------------------------

namespace {

Json barrier_template(const std::string& type) {
  Json t = {{"name", ""}, {"type", type}, {"rule", "none"}, {"alpha", 0.0}, {"beta", 0.0},
            {"eta", Json::array()}, {"rho_d", Json::array()}, {"k_alpha", 1.0}, {"soft", false}};
  if (type == "road") {
    t["previews"] = {0.0, 1.0};
  } else if (type == "collision") {
    t["d_min"] = 4.0;
    t["horizon"] = 5.0;
    t["relax"] = 0.1;
    t["length"] = 1.0;
    t["lateral_weight"] = 1.0;
  } else if (type != "disk" && type != "level") {
    throw ConfigError("unknown barrier type '" + type + "'");
  }
  return t;
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void overlay(Json& base, const Json& user, const std::string& path);

Json resolve_barrier(const Json& item, const std::string& path) {
  if (!item.is_object() || !item.contains("type")) throw ConfigError(path + ": barrier entry needs a 'type'");
  Json resolved = barrier_template(item.at("type").get<std::string>());
  overlay(resolved, item, path);
  return resolved;
}

void overlay(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = it.key();
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    Json& slot = base[key];
    if (key == "barriers" && path.empty()) {
      if (!it.value().is_array()) throw ConfigError("'barriers' must be an array");
      Json list = Json::array();
      for (std::size_t i = 0; i < it.value().size(); ++i) {
        list.push_back(resolve_barrier(it.value()[i], "barriers." + std::to_string(i)));
      }
      slot = list;
    } else if (slot.is_object()) {
      overlay(slot, it.value(), where);
    } else {
      if (!same_kind(slot, it.value()) && !slot.is_null()) {
        throw ConfigError("config key '" + where + "' has the wrong type");
      }
      slot = it.value();
    }
  }
}

}  // namespace

Json default_config(const std::string& kind) {
  if (kind == "robot") {
    return Json::parse(R"({
      "scenario": "robot",
      "name": "robot",
      "model": {"radius": 1.0, "goal": [2.0, 2.0], "goal_radius": 0.25, "v_max": 10.0,
                "z0": [0.7071067811865476, 0.0], "gamma": 0.5},
      "noise": {"sigma": [0.003, 0.003]},
      "barriers": [{"name": "disk", "type": "disk", "rule": "scbf", "alpha": 0.1, "beta": 0.01,
                    "eta": [], "rho_d": [], "k_alpha": 1.0, "soft": false}],
      "cascade": {"levels": [1.0]},
      "nominal": {"gain": 1.0},
      "mc": {"N": 10000, "T": 1.0, "dt": 0.001, "seed": 1}
    })");
  }
  if (kind == "merge") {
    Json c = Json::parse(R"({
      "scenario": "merge",
      "name": "merge",
      "model": {"vehicles": 10, "spacing": 15.0, "lanes": [0.0, 3.0], "lane_width": 3.0, "lead_x0": -93.0,
                "ramp_angle_deg": 3.0, "merge_x": 0.0, "ego_distance": 98.75, "ego_speed": [24.0, 26.0],
                "traffic_speed": [29.0, 31.0], "time_gap": [0.25, 0.75], "l_f": 1.5, "l_r": 1.5,
                "a_bar": 2.0, "omega_bar": 0.19634954084936207,
                "idm": {"desired_speed": 30.0, "jam_distance": 2.0, "max_accel": 2.0, "comfort_decel": 2.0,
                        "hard_decel": 6.0, "length": 4.0, "yield_band": 1.5},
                "merge_tolerance": 0.5, "risk_target": 0.01},
      "noise": {"drag_speed": 35.0, "scale": 1.0},
      "barriers": [],
      "cascade": {"levels": [0.2, 0.4, 0.6, 0.8, 1.0]},
      "nominal": {"v_d": 30.0, "track": "lane", "state_weights": [1.0, 1.0, 1.0, 1.0], "control_weights": [1.0, 1.0],
                  "design_dt": 0.01},
      "mc": {"N": 200, "T": 4.0, "dt": 0.001, "seed": 1}
    })");
    Json road = barrier_template("road");
    road["name"] = "road";
    road["rule"] = "racbf";
    road["eta"] = {0.012, 0.025, 0.035, 0.046, 0.067};
    road["rho_d"] = {0.001, 0.1, 0.25, 0.5, 0.6};
    Json coll = barrier_template("collision");
    coll["name"] = "collision";
    coll["rule"] = "racbf";
    coll["eta"] = {0.018, 0.031, 0.049, 0.063, 0.076};
    coll["rho_d"] = {0.05, 0.15, 0.4, 0.5, 0.6};
    c["barriers"] = {road, coll};
    return c;
  }
  if (kind == "wiener") {
    return Json::parse(R"({
      "scenario": "wiener",
      "name": "wiener",
      "model": {"level": 1.0},
      "noise": {"sigma": 1.0},
      "barriers": [],
      "cascade": {"levels": [1.0]},
      "nominal": {},
      "mc": {"N": 100000, "T": 1.0, "dt": 0.001, "seed": 1}
    })");
  }
  throw ConfigError("unknown scenario kind '" + kind + "'");
}

Json resolve_config(const Json& user) {
  if (!user.is_object() || !user.contains("scenario")) throw ConfigError("config needs a 'scenario' key");
  Json resolved = default_config(user.at("scenario").get<std::string>());
  overlay(resolved, user, "");
  return resolved;
}

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json user;
  try {
    user = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return resolve_config(user);
}

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json* slot = &config;
  std::stringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (slot->is_object() && slot->contains(part)) {
      slot = &(*slot)[part];
    } else if (slot->is_array() && !part.empty() && std::all_of(part.begin(), part.end(), ::isdigit) &&
               std::stoul(part) < slot->size()) {
      slot = &(*slot)[std::stoul(part)];
    } else {
      throw ConfigError("unknown config key '" + path + "'");
    }
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  if (!slot->is_null() && !same_kind(*slot, value)) throw ConfigError("override '" + path + "' has the wrong type");
  *slot = value;
}

// ---- scenarios ------------------------------------------------------------

std::string Scenario::classify(const TrajectoryRecord& record, const TrialInstance&) const {
  return record.stopped ? "unsafe" : "safe";
}

LevelPlan make_level_plan(double gamma, const std::vector<double>& upper_levels, const std::vector<double>& etas,
                          const std::vector<double>& rho_d, double horizon, double k_alpha, bool soft) {
  if (etas.size() != upper_levels.size() || rho_d.size() != upper_levels.size()) {
    throw ConfigError("RA-CBF barrier needs one eta and one rho_d per cascade level (" +
                      std::to_string(upper_levels.size()) + ")");
  }
  LevelPlan plan;
  plan.levels.push_back(gamma);
  for (std::size_t i = 0; i < upper_levels.size(); ++i) {
    if (upper_levels[i] <= gamma) continue;
    plan.levels.push_back(upper_levels[i]);
    plan.etas.push_back(etas[i]);
    plan.rho_d.push_back(rho_d[i]);
  }
  plan.horizon = horizon;
  plan.k_alpha = k_alpha;
  plan.soft = soft;
  if (plan.levels.size() < 2) throw ConfigError("initial barrier value is above every cascade level");
  return plan;
}

namespace {

std::vector<double> to_vector(const Json& j) { return j.get<std::vector<double>>(); }

double product(const std::vector<double>& v) {
  double p = 1.0;
  for (double x : v) p *= x;
  return p;
}

FilterRule make_rule(const Json& item, double gamma, const std::vector<double>& levels, double horizon) {
  FilterRule rule;
  const std::string kind = item.at("rule");
  if (kind == "scbf") {
    ScbfRule s;
    s.alpha = item.at("alpha");
    s.beta = item.at("beta");
    s.soft = item.at("soft");
    if (s.alpha < 0.0 || s.beta < 0.0) throw ConfigError("S-CBF gains must be >= 0");
    rule.scbf = s;
  } else if (kind == "racbf") {
    rule.racbf = make_level_plan(gamma, levels, to_vector(item.at("eta")), to_vector(item.at("rho_d")), horizon,
                                 item.at("k_alpha"), item.at("soft"));
    rule.racbf->validate();
  } else if (kind != "none") {
    throw ConfigError("unknown filter rule '" + kind + "'");
  }
  return rule;
}

std::vector<Vector> disk_samples(double radius, int count, std::uint64_t seed) {
  std::vector<Vector> out;
  std::uint64_t i = 0;
  while (static_cast<int>(out.size()) < count) {
    const double x = radius * (2.0 * uniform_draw(seed, 0, i) - 1.0);
    const double y = radius * (2.0 * uniform_draw(seed, 1, i) - 1.0);
    ++i;
    if (x * x + y * y < radius * radius) out.push_back(Eigen::Vector2d(x, y));
  }
  return out;
}

CheckResult derivative_result(const std::string& name, const DerivativeCheck& d) {
  std::ostringstream s;
  s << "grad err " << d.worst_gradient_error << ", hess err " << d.worst_hessian_error << ", asym "
    << d.worst_asymmetry;
  if (!d.ok) s << "; " << d.detail;
  return {"barrier-calculus", "derivatives:" + name, d.ok, s.str()};
}

CheckResult admissibility_check(const std::function<void()>& build) {
  try {
    build();
    return {"risk-engine", "admissibility", true, "all risk budgets inside their admissible intervals"};
  } catch (const std::exception& e) {
    return {"risk-engine", "admissibility", false, e.what()};
  }
}

// ---------------------------------------------------------------------------

class RobotScenario : public Scenario {
 public:
  explicit RobotScenario(Json config) : Scenario(std::move(config)) {
    const Json& m = config_.at("model");
    radius_ = m.at("radius");
    goal_ = Eigen::Map<const Eigen::Vector2d>(to_vector(m.at("goal")).data());
    const auto z0 = to_vector(m.at("z0"));
    if (z0.size() != 2 || to_vector(m.at("goal")).size() != 2) throw ConfigError("robot z0 and goal are 2-vectors");
    z0_ = Eigen::Vector2d(z0[0], z0[1]);
    const auto sigma = to_vector(config_.at("noise").at("sigma"));
    if (sigma.size() != 2) throw ConfigError("noise.sigma must have two entries");
    model_ = single_integrator_model(sigma[0], sigma[1]);
    if (config_.at("barriers").size() != 1) throw ConfigError("robot scenario takes exactly one barrier entry");
    item_ = config_.at("barriers")[0];
    if (item_.at("type") != "disk") throw ConfigError("robot barrier must have type 'disk'");
    levels_ = to_vector(config_.at("cascade").at("levels"));
    gamma_ = robot_barrier(radius_).value(z0_);
    // Fail fast on budgets.
    make_rule(item_, gamma_, levels_, horizon());
  }

  std::unique_ptr<TrialInstance> instantiate(std::uint64_t, bool debug) const override {
    auto t = std::make_unique<TrialInstance>();
    t->model = model_;
    BarrierSpec b = robot_barrier(radius_, gamma_);
    b.name = item_.at("name");
    const FilterRule rule = make_rule(item_, gamma_, levels_, horizon());
    if (rule.racbf) b.levels = rule.racbf->levels;
    t->barriers = {b};
    t->x0 = z0_;
    const double vmax = config_.at("model").at("v_max");
    const double gain = config_.at("nominal").at("gain");
    const Vector goal = goal_;
    FilterSettings settings;
    settings.lower = Vector::Constant(2, -vmax);
    settings.upper = Vector::Constant(2, vmax);
    settings.debug = debug;
    t->controller = std::make_unique<CbfFilterController>(
        t->model, t->barriers, std::vector<FilterRule>{rule},
        [goal, gain, vmax](double, const Vector& x) { return robot_nominal(x, goal, gain, vmax); }, settings);
    return t;
  }

  std::vector<std::string> barrier_names() const override { return {item_.at("name")}; }
  std::vector<std::vector<double>> eta_levels() const override { return {levels_}; }

  RiskPrediction predicted() const override {
    RiskPrediction p;
    const std::string rule = item_.at("rule");
    p.detail["gamma"] = gamma_;
    p.detail["T"] = horizon();
    if (rule == "scbf") {
      const BoundResult r = scbf_risk_bound(item_.at("alpha"), item_.at("beta"), gamma_, horizon());
      p.formula = "scbf";
      p.value = r.value;
      p.detail["branch"] = r.branch;
      p.detail["alpha"] = item_.at("alpha");
      p.detail["beta"] = item_.at("beta");
    } else if (rule == "racbf") {
      const LevelPlan plan = *make_rule(item_, gamma_, levels_, horizon()).racbf;
      p.formula = "racbf";
      p.value = product(plan.rho_d);
      p.detail["eta"] = plan.etas;
      p.detail["rho_d"] = plan.rho_d;
      p.detail["min_risk"] = cascaded_risk_bound(plan.cascade()).product;
      p.detail["k_alpha"] = plan.k_alpha;
    } else {
      p.formula = "none";
    }
    return p;
  }

  std::vector<CheckResult> validate() const override {
    std::vector<CheckResult> out;
    const double configured = config_.at("model").at("gamma");
    {
      std::ostringstream s;
      s.precision(17);
      s << "B(z0) = " << gamma_ << ", configured gamma = " << configured;
      out.push_back({"scenarios", "gamma-from-z0", std::abs(gamma_ - configured) <= 1e-15, s.str()});
    }
    {
      const double r_g = config_.at("model").at("goal_radius");
      const double clearance = goal_.norm() - r_g - radius_;
      out.push_back({"scenarios", "goal-disjoint", clearance > 0.0,
                     "goal disk clears the safe disk by " + std::to_string(clearance) + " m"});
    }
    out.push_back(admissibility_check([&] { make_rule(item_, gamma_, levels_, horizon()); }));
    out.push_back(derivative_result(item_.at("name"),
                                    check_derivatives(robot_barrier(radius_), disk_samples(radius_, 200, 7))));
    return out;
  }

 private:
  double radius_ = 1.0;
  Eigen::Vector2d goal_;
  Eigen::Vector2d z0_;
  double gamma_ = 0.5;
  SdeModel model_;
  Json item_;
  std::vector<double> levels_;
};

// ---------------------------------------------------------------------------

// Bare paths: nothing to filter.
class ZeroController : public Controller {
 public:
  explicit ZeroController(int m) : u_(Vector::Zero(m)) {}
  ControlDecision decide(double, const Vector&) override { return {u_, false}; }

 private:
  Vector u_;
};

class WienerScenario : public Scenario {
 public:
  explicit WienerScenario(Json config) : Scenario(std::move(config)) {
    level_ = config_.at("model").at("level");
    sigma_ = config_.at("noise").at("sigma");
    if (!(level_ > 0.0) || !(sigma_ > 0.0)) throw ConfigError("wiener scenario needs level > 0 and sigma > 0");
  }

  std::unique_ptr<TrialInstance> instantiate(std::uint64_t, bool) const override {
    auto t = std::make_unique<TrialInstance>();
    const double sigma = sigma_;
    t->model.n = t->model.m = t->model.q = 1;
    t->model.drift = [](const Vector&) -> Vector { return Vector::Zero(1); };
    t->model.control_matrix = [](const Vector&) -> Matrix { return Matrix::Zero(1, 1); };
    t->model.diffusion = [sigma](const Vector&) -> Matrix { return Matrix::Constant(1, 1, sigma); };
    // Level-crossing indicator w / a; only its value is used, to stop the path at a.
    const double inv = 1.0 / level_;
    BarrierSpec b;
    b.name = "level";
    b.value = [inv](const Vector& x) { return x[0] * inv; };
    b.gradient = [inv](const Vector&) -> Vector { return Vector::Constant(1, inv); };
    b.hessian = [](const Vector&) -> Matrix { return Matrix::Zero(1, 1); };
    t->barriers = {b};
    t->x0 = Vector::Zero(1);
    t->controller = std::make_unique<ZeroController>(1);
    return t;
  }

  std::vector<std::string> barrier_names() const override { return {"level"}; }
  std::vector<std::vector<double>> eta_levels() const override { return {{1.0}}; }

  RiskPrediction predicted() const override {
    RiskPrediction p;
    p.formula = "wiener_sup_law";
    p.value = 1.0 - wiener_sup_law(level_ / sigma_, horizon());
    p.detail["a"] = level_ / sigma_;
    p.detail["T"] = horizon();
    return p;
  }

  std::vector<CheckResult> validate() const override {
    return {{"scenarios", "wiener-parameters", true, "level and sigma positive"}};
  }

 private:
  double level_ = 1.0;
  double sigma_ = 1.0;
};

// ---------------------------------------------------------------------------

struct MergeWorld {
  int vehicles = 10;  // highway vehicles; the ego is block 0
  BicycleParams bike;
  RoadGeometry road;
  std::vector<double> lanes;
  IdmParams idm;
  double length = 4.0;
  LaneKeepingGains gains;
  double a_bar = 2.0;
  double omega_bar = 0.19634954084936207;
  double v_d = 30.0;
  double yield_band = 1.5;  // lateral reach within which traffic yields to the ego
  bool track_road = false;  // ego nominal follows the road centreline instead of the target lane

  int blocks() const { return vehicles + 1; }
  double lane_of(int vehicle) const { return lanes[(vehicle % 2 == 0) ? 0 : 1]; }
};

struct MergeDraw {
  double ego_speed = 25.0;
  std::vector<double> speeds;     // highway vehicles 1..N
  std::vector<double> time_gaps;  // highway vehicles 1..N
};

class MergeScenario : public Scenario {
 public:
  explicit MergeScenario(Json config) : Scenario(std::move(config)) {
    const Json& m = config_.at("model");
    world_.vehicles = m.at("vehicles");
    if (world_.vehicles < 2) throw ConfigError("merge scenario needs at least two highway vehicles");
    world_.bike = {m.at("l_f"), m.at("l_r")};
    world_.lanes = to_vector(m.at("lanes"));
    if (world_.lanes.size() != 2) throw ConfigError("model.lanes must list two lane centres");
    world_.road.ramp_angle = static_cast<double>(m.at("ramp_angle_deg")) * std::numbers::pi / 180.0;
    world_.road.merge_x = m.at("merge_x");
    world_.road.lane_center = world_.lanes[0];
    world_.road.lane_width = m.at("lane_width");
    const Json& idm = m.at("idm");
    world_.idm.desired_speed = idm.at("desired_speed");
    world_.idm.jam_distance = idm.at("jam_distance");
    world_.idm.max_accel = idm.at("max_accel");
    world_.idm.comfort_decel = idm.at("comfort_decel");
    world_.idm.hard_decel = idm.at("hard_decel");
    world_.length = idm.at("length");
    world_.yield_band = idm.at("yield_band");
    if (!(world_.yield_band >= 0.0)) throw ConfigError("model.idm.yield_band must be >= 0");
    world_.a_bar = m.at("a_bar");
    world_.omega_bar = m.at("omega_bar");
    const Json& nominal = config_.at("nominal");
    world_.v_d = nominal.at("v_d");
    const std::string track = nominal.at("track");
    if (track != "lane" && track != "road") throw ConfigError("nominal.track must be \"lane\" or \"road\"");
    world_.track_road = track == "road";
    LaneKeepingDesign design;
    design.v_d = world_.v_d;
    design.l_r = world_.bike.l_r;
    design.design_dt = nominal.at("design_dt");
    const auto sw = to_vector(nominal.at("state_weights"));
    const auto cw = to_vector(nominal.at("control_weights"));
    if (sw.size() != 4 || cw.size() != 2) throw ConfigError("nominal weights must have 4 state and 2 control entries");
    std::copy(sw.begin(), sw.end(), design.state_weights.begin());
    std::copy(cw.begin(), cw.end(), design.control_weights.begin());
    world_.gains = lane_keeping_gains(design);

    const Json& noise = config_.at("noise");
    sigma_a_ = static_cast<double>(noise.at("scale")) * drag_acceleration(noise.at("drag_speed")) * dt();
    sigma_omega_ = sigma_a_ * world_.omega_bar / world_.a_bar;

    levels_ = to_vector(config_.at("cascade").at("levels"));
    for (const Json& item : config_.at("barriers")) {
      const std::string type = item.at("type");
      if (type == "road") {
        if (road_item_) throw ConfigError("merge scenario takes one road barrier");
        road_item_ = item;
        world_.road.previews = to_vector(item.at("previews"));
      } else if (type == "collision") {
        if (collision_item_) throw ConfigError("merge scenario takes one collision barrier entry");
        collision_item_ = item;
        collision_.d_min = item.at("d_min");
        collision_.horizon = item.at("horizon");
        collision_.relax = item.at("relax");
        collision_.length = item.at("length");
        collision_.lateral_weight = item.at("lateral_weight");
      } else {
        throw ConfigError("merge scenario does not support barrier type '" + type + "'");
      }
    }
    if (!road_item_ || !collision_item_) throw ConfigError("merge scenario needs a road and a collision barrier");
    // Fail fast on budgets at the mean initial condition.
    auto trial = build_trial(mean_draw(), true, false, false);
    (void)trial;
  }

  std::unique_ptr<TrialInstance> instantiate(std::uint64_t seed, bool debug) const override {
    return build_trial(sample_draw(seed), true, true, debug);
  }

  std::string classify(const TrajectoryRecord& record, const TrialInstance& trial) const override {
    if (record.stopped) return "unsafe";
    const Vector x = record.states.col(record.states.cols() - 1);
    (void)trial;
    const double tol = config_.at("model").at("merge_tolerance");
    if (std::abs(x[kY] - world_.road.lane_center) >= tol) return "not-merged";
    return x[kX] < x[kBicycleDim * 2 + kX] ? "merged-behind" : "merged-ahead";
  }

  std::vector<std::string> barrier_names() const override {
    std::vector<std::string> names{road_item_->at("name")};
    const std::string base = collision_item_->at("name");
    for (int i = 1; i <= world_.vehicles; ++i) names.push_back(base + "_" + std::to_string(i));
    return names;
  }

  std::vector<std::vector<double>> eta_levels() const override {
    return std::vector<std::vector<double>>(static_cast<std::size_t>(world_.blocks()), levels_);
  }

  RiskPrediction predicted() const override {
    RiskPrediction p;
    p.formula = "merge-composite";
    const double road = budget_product(*road_item_);
    const double coll = budget_product(*collision_item_);
    const double survival = (1.0 - road) * std::pow(1.0 - coll, world_.vehicles);
    p.value = 1.0 - survival;
    p.detail["road_budget"] = road;
    p.detail["collision_budget_per_vehicle"] = coll;
    p.detail["road_survival"] = 1.0 - road;
    p.detail["collision_survival"] = std::pow(1.0 - coll, world_.vehicles);
    p.detail["T"] = horizon();
    return p;
  }

  std::vector<CheckResult> validate() const override {
    std::vector<CheckResult> out;
    out.push_back(admissibility_check([&] { build_trial(mean_draw(), true, false, false); }));

    const RiskPrediction pred = predicted();
    const double target = config_.at("model").at("risk_target");
    {
      std::ostringstream s;
      s << "composite risk " << pred.value << " vs target " << target;
      out.push_back({"scenarios", "composite-budget", pred.value <= target + 1e-12, s.str()});
    }

    // Initial placement: the extreme draws still leave every pair apart.
    auto trial = build_trial(mean_draw(), false, false, false);
    {
      double closest = std::numeric_limits<double>::infinity();
      for (int i = 0; i < world_.blocks(); ++i) {
        for (int j = i + 1; j < world_.blocks(); ++j) {
          const double dx = trial->x0[kBicycleDim * i + kX] - trial->x0[kBicycleDim * j + kX];
          const double dy = trial->x0[kBicycleDim * i + kY] - trial->x0[kBicycleDim * j + kY];
          closest = std::min(closest, std::hypot(dx, dy));
        }
      }
      bool inside = true;
      for (const auto& b : trial->barriers) inside = inside && b.value(trial->x0) < 1.0;
      out.push_back({"scenarios", "initial-placement", closest > collision_.d_min && inside,
                     "closest initial pair " + std::to_string(closest) + " m"});
    }

    // Nominal-only deterministic rollout must put the ego into vehicle 2.
    const TrajectoryRecord rec = simulate_trial(trial->model, *trial->controller, {}, trial->x0, trial_config(0));
    double closest = std::numeric_limits<double>::infinity();
    double when = 0.0;
    for (Eigen::Index k = 0; k < rec.states.cols(); ++k) {
      const double dx = rec.states(kX, k) - rec.states(2 * kBicycleDim + kX, k);
      const double dy = rec.states(kY, k) - rec.states(2 * kBicycleDim + kY, k);
      if (std::hypot(dx, dy) < closest) {
        closest = std::hypot(dx, dy);
        when = rec.time[static_cast<std::size_t>(k)];
      }
    }
    out.push_back({"scenarios", "nominal-conflict", closest < collision_.d_min,
                   "nominal ego passes vehicle 2 at " + std::to_string(closest) + " m (t = " + std::to_string(when) +
                       " s), d_min = " + std::to_string(collision_.d_min)});

    // Derivative oracles at states the filtered closed loop actually visits.
    auto filtered = build_trial(mean_draw(), true, false, false);
    const TrajectoryRecord visited =
        simulate_trial(filtered->model, *filtered->controller, filtered->barriers, filtered->x0, trial_config(0));
    std::vector<Vector> samples;
    for (Eigen::Index k = 0; k < visited.states.cols(); k += 250) samples.push_back(visited.states.col(k));
    constexpr double kSwitchBand = 0.02;  // s
    // the clamp on tau* leaves a kink in the Hessian; stencils straddling it are not an oracle
    for (std::size_t i = 0; i < filtered->barriers.size(); ++i) {
      const auto& b = filtered->barriers[i];
      std::vector<Vector> kept;
      for (const Vector& x : samples) {
        if (i > 0) {
          const double tau = collision_closest_time(collision_, x.data(), x.data() + kBicycleDim * i);
          if (std::abs(tau) < kSwitchBand || std::abs(tau - collision_.horizon) < kSwitchBand) continue;
        }
        kept.push_back(x);
      }
      out.push_back(derivative_result(b.name, check_derivatives(b, kept)));
    }
    return out;
  }

 private:
  double budget_product(const Json& item) const {
    return item.at("rule") == "racbf" ? product(to_vector(item.at("rho_d"))) : 1.0;
  }

  MergeDraw mean_draw() const {
    const Json& m = config_.at("model");
    auto mid = [](const Json& range) { return 0.5 * (range[0].get<double>() + range[1].get<double>()); };
    MergeDraw d;
    d.ego_speed = mid(m.at("ego_speed"));
    d.speeds.assign(world_.vehicles, mid(m.at("traffic_speed")));
    d.time_gaps.assign(world_.vehicles, mid(m.at("time_gap")));
    return d;
  }

  MergeDraw sample_draw(std::uint64_t seed) const {
    const Json& m = config_.at("model");
    auto draw = [&](const Json& range, std::uint64_t stream, std::uint64_t index) {
      const double lo = range[0], hi = range[1];
      return lo + (hi - lo) * uniform_draw(seed, stream, index);
    };
    MergeDraw d;
    d.ego_speed = draw(m.at("ego_speed"), 0, 0);
    for (int i = 0; i < world_.vehicles; ++i) {
      d.speeds.push_back(draw(m.at("traffic_speed"), 1, i));
      d.time_gaps.push_back(draw(m.at("time_gap"), 2, i));
    }
    return d;
  }

  Vector initial_state(const MergeDraw& d) const {
    const Json& m = config_.at("model");
    Vector x = Vector::Zero(kBicycleDim * world_.blocks());
    const double dist = m.at("ego_distance");
    const double theta = world_.road.ramp_angle;
    x[kX] = world_.road.merge_x - dist * std::cos(theta);
    x[kY] = world_.road.lane_center - dist * std::sin(theta);
    x[kPsi] = theta;
    x[kV] = d.ego_speed;
    const double lead = m.at("lead_x0");
    const double spacing = m.at("spacing");
    for (int i = 1; i <= world_.vehicles; ++i) {
      double* z = x.data() + kBicycleDim * i;
      z[kX] = lead - spacing * (i - 1);
      z[kY] = world_.lane_of(i);
      z[kV] = d.speeds[i - 1];
    }
    return x;
  }

  SdeModel joint_model(const MergeDraw& d, bool noisy) const {
    auto world = std::make_shared<const MergeWorld>(world_);
    auto gaps = std::make_shared<const std::vector<double>>(d.time_gaps);
    const int blocks = world_.blocks();
    SdeModel model;
    model.n = kBicycleDim * blocks;
    model.m = 2;
    model.q = 2 * blocks;
    model.drift = [world, gaps, blocks](const Vector& x) -> Vector {
      Vector f(kBicycleDim * blocks);
      f.segment<kBicycleDim>(0) = bicycle_rates(world->bike, x.data(), 0.0, 0.0);
      for (int i = 1; i < blocks; ++i) {
        const double* z = x.data() + kBicycleDim * i;
        const double lane = world->lane_of(i);
        // nearest vehicle ahead inside this lane band; the ego counts from
        // yield_band off the lane centre
        double gap = std::numeric_limits<double>::infinity();
        double lead_speed = z[kV];
        for (int j = 0; j < blocks; ++j) {
          if (j == i) continue;
          const double* o = x.data() + kBicycleDim * j;
          const double band = j == 0 ? world->yield_band : 0.5 * world->road.lane_width;
          if (std::abs(o[kY] - lane) >= band || o[kX] <= z[kX]) continue;
          const double s = o[kX] - z[kX] - world->length;
          if (s < gap) {
            gap = s;
            lead_speed = planar_velocity(o[kPsi], o[kV], o[kBeta]).w[0];
          }
        }
        IdmParams idm = world->idm;
        idm.time_gap = (*gaps)[i - 1];
        const double a = idm_accel(z[kV], lead_speed, std::max(gap, 0.1), idm);
        const double omega =
            vehicle_nominal(z, lane, 0.0, world->v_d, world->gains, world->a_bar, world->omega_bar)[1];
        f.segment<kBicycleDim>(kBicycleDim * i) = bicycle_rates(world->bike, z, a, omega);
      }
      return f;
    };
    model.control_matrix = [blocks](const Vector&) -> Matrix {
      Matrix g = Matrix::Zero(kBicycleDim * blocks, 2);
      g(kV, 0) = 1.0;
      g(kBeta, 1) = 1.0;
      return g;
    };
    Matrix sigma = Matrix::Zero(kBicycleDim * blocks, 2 * blocks);
    if (noisy) {
      for (int i = 0; i < blocks; ++i) {
        sigma(kBicycleDim * i + kV, 2 * i) = sigma_a_;
        sigma(kBicycleDim * i + kBeta, 2 * i + 1) = sigma_omega_;
      }
    }
    model.diffusion = [sigma](const Vector&) -> Matrix { return sigma; };
    return model;
  }

  std::unique_ptr<TrialInstance> build_trial(const MergeDraw& d, bool filtered, bool noisy, bool debug) const {
    auto t = std::make_unique<TrialInstance>();
    t->model = joint_model(d, noisy);
    t->x0 = initial_state(d);
    std::vector<FilterRule> rules;
    auto add = [&](BarrierSpec b, const Json& item) {
      b.gamma = b.value(t->x0);
      FilterRule rule;
      if (filtered) rule = make_rule(item, b.gamma, levels_, horizon());
      if (rule.racbf) b.levels = rule.racbf->levels;
      t->barriers.push_back(std::move(b));
      rules.push_back(std::move(rule));
    };
    add(road_barrier(world_.road, 0, road_item_->at("name")), *road_item_);
    const std::string base = collision_item_->at("name");
    for (int i = 1; i <= world_.vehicles; ++i) {
      add(collision_barrier(collision_, 0, kBicycleDim * i, base + "_" + std::to_string(i)), *collision_item_);
    }
    auto world = std::make_shared<const MergeWorld>(world_);
    FilterSettings settings;
    settings.lower = Eigen::Vector2d(-world_.a_bar, -world_.omega_bar);
    settings.upper = Eigen::Vector2d(world_.a_bar, world_.omega_bar);
    settings.debug = debug;
    NominalLaw nominal = [world](double, const Vector& x) -> Vector {
      const double* z = x.data();
      if (!world->track_road) {
        return vehicle_nominal(z, world->road.lane_center, 0.0, world->v_d, world->gains, world->a_bar,
                               world->omega_bar);
      }
      return vehicle_nominal(z, world->road.centre(z[kX]), world->road.angle(z[kX]), world->v_d, world->gains,
                             world->a_bar, world->omega_bar);
    };
    t->controller =
        std::make_unique<CbfFilterController>(t->model, t->barriers, std::move(rules), nominal, settings);
    return t;
  }

  MergeWorld world_;
  CollisionParams collision_;
  std::optional<Json> road_item_;
  std::optional<Json> collision_item_;
  std::vector<double> levels_;
  double sigma_a_ = 0.0;
  double sigma_omega_ = 0.0;
};

}  // namespace

std::shared_ptr<const Scenario> build_scenario(const Json& config, bool check) {
  const std::string kind = config.at("scenario");
  std::shared_ptr<const Scenario> scenario;
  try {
    if (kind == "robot") {
      scenario = std::make_shared<RobotScenario>(config);
    } else if (kind == "merge") {
      scenario = std::make_shared<MergeScenario>(config);
    } else if (kind == "wiener") {
      scenario = std::make_shared<WienerScenario>(config);
    } else {
      throw ConfigError("unknown scenario kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  const Json& mc = config.at("mc");
  if (!(mc.at("dt").get<double>() > 0.0) || mc.at("dt").get<double>() > mc.at("T").get<double>()) {
    throw ConfigError("mc: need 0 < dt <= T");
  }
  if (mc.at("N").get<long long>() < 1) throw ConfigError("mc.N must be >= 1");
  if (check) {
    for (const CheckResult& r : scenario->validate()) {
      if (!r.ok) throw ConfigError(r.module + "/" + r.check + ": " + r.detail);
    }
  }
  return scenario;
}

}  // namespace riskgate
