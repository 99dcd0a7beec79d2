#include "riskgate/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace riskgate {

SdeModel single_integrator_model(double sigma_x, double sigma_y) {
  if (sigma_x < 0.0 || sigma_y < 0.0) throw ContractViolation("noise intensities must be >= 0");
  SdeModel model;
  model.n = model.m = model.q = 2;
  model.drift = [](const Vector&) -> Vector { return Vector::Zero(2); };
  model.control_matrix = [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); };
  Matrix sigma = Matrix::Zero(2, 2);
  sigma(0, 0) = sigma_x;
  sigma(1, 1) = sigma_y;
  model.diffusion = [sigma](const Vector&) -> Matrix { return sigma; };
  return model;
}

PlanarVelocity planar_velocity(double psi, double v, double beta) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  const double t = std::tan(beta);
  const double sec2 = 1.0 + t * t;
  PlanarVelocity out;
  const double ux = c - s * t;  // x_dot / v
  const double uy = s + c * t;  // y_dot / v
  out.w = {v * ux, v * uy};
  // order of partials: psi, v, beta
  out.jacobian[0] = {-v * uy, ux, -v * s * sec2};
  out.jacobian[1] = {v * ux, uy, v * c * sec2};

  Eigen::Matrix3d hx;
  hx << -v * ux, -uy, -v * c * sec2,
        -uy, 0.0, -s * sec2,
        -v * c * sec2, -s * sec2, -2.0 * v * s * sec2 * t;
  Eigen::Matrix3d hy;
  hy << -v * uy, ux, -v * s * sec2,
        ux, 0.0, c * sec2,
        -v * s * sec2, c * sec2, 2.0 * v * c * sec2 * t;
  out.hessian = {hx, hy};
  return out;
}

Eigen::Matrix<double, 5, 1> bicycle_rates(const BicycleParams& params, const double* z, double a, double omega) {
  const double psi = z[kPsi];
  const double v = z[kV];
  const double t = std::tan(z[kBeta]);
  Eigen::Matrix<double, 5, 1> r;
  r << v * (std::cos(psi) - std::sin(psi) * t), v * (std::sin(psi) + std::cos(psi) * t), v * t / params.l_r, a, omega;
  return r;
}

SdeModel bicycle_model(const BicycleParams& params, double sigma_a, double sigma_omega) {
  if (!(params.l_f > 0.0) || !(params.l_r > 0.0)) throw ContractViolation("axle distances must be > 0");
  SdeModel model;
  model.n = kBicycleDim;
  model.m = 2;
  model.q = 2;
  model.drift = [params](const Vector& z) -> Vector { return bicycle_rates(params, z.data(), 0.0, 0.0); };
  model.control_matrix = [](const Vector&) -> Matrix {
    Matrix g = Matrix::Zero(kBicycleDim, 2);
    g(kV, 0) = 1.0;
    g(kBeta, 1) = 1.0;
    return g;
  };
  Matrix sigma = Matrix::Zero(kBicycleDim, 2);
  sigma(kV, 0) = sigma_a;
  sigma(kBeta, 1) = sigma_omega;
  model.diffusion = [sigma](const Vector&) -> Matrix { return sigma; };
  return model;
}

double clamp_steering(double beta, double omega, double beta_limit) {
  if ((beta >= beta_limit && omega > 0.0) || (beta <= -beta_limit && omega < 0.0)) return 0.0;
  return omega;
}

double drag_acceleration(double speed) { return 0.1 + 5.0 * speed + 0.25 * speed * speed; }

double idm_accel(double v, double v_lead, double gap, const IdmParams& p) {
  if (!(gap > 0.0)) throw DomainError("idm_accel: leader overlap (gap <= 0)");
  const double free_term = std::pow(std::max(v, 0.0) / p.desired_speed, p.exponent);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double desired = p.jam_distance + v * p.time_gap +
                           v * (v - v_lead) / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
    const double ratio = std::max(desired, 0.0) / gap;
    interaction = ratio * ratio;
  }
  const double a = p.max_accel * (1.0 - free_term - interaction);
  return std::clamp(a, -p.hard_decel, p.max_accel);
}

Vector robot_nominal(const Vector& z, const Vector& goal, double gain, double limit) {
  if (!(gain > 0.0)) throw ContractViolation("nominal gain must be > 0");
  return (-gain * (z - goal)).cwiseMax(-limit).cwiseMin(limit);
}

Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, double tol, int max_iterations) {
  // Structure-preserving doubling; converges quadratically for stabilizable
  // and detectable (A, B, Q).
  const auto n = a.rows();
  Matrix ak = a;
  Matrix gk = b * r.llt().solve(b.transpose());
  Matrix hk = q;
  const Matrix eye = Matrix::Identity(n, n);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::PartialPivLU<Matrix> lu(eye + gk * hk);
    const Matrix w_a = lu.solve(ak);
    const Matrix w_g = lu.solve(gk);
    const Matrix h_next = hk + ak.transpose() * hk * w_a;
    gk = gk + ak * w_g * ak.transpose();
    ak = ak * w_a;
    const double change = (h_next - hk).norm();
    hk = 0.5 * (h_next + h_next.transpose());
    if (change <= tol * std::max(1.0, hk.norm())) return hk;
  }
  throw std::runtime_error("solve_dare: no convergence");
}

LaneKeepingGains lane_keeping_gains(const LaneKeepingDesign& d) {
  if (!(d.v_d > 0.0) || !(d.l_r > 0.0) || !(d.design_dt > 0.0)) throw ContractViolation("lane keeping design needs positive v_d, l_r, dt");
  // e = (e_y, psi, beta, e_v), u = (a, omega); A^3 = 0 so the exponential is exact.
  Matrix a = Matrix::Zero(4, 4);
  a(0, 1) = d.v_d;
  a(0, 2) = d.v_d;
  a(1, 2) = d.v_d / d.l_r;
  Matrix b = Matrix::Zero(4, 2);
  b(3, 0) = 1.0;
  b(2, 1) = 1.0;
  const double h = d.design_dt;
  const Matrix eye = Matrix::Identity(4, 4);
  const Matrix a2 = a * a;
  const Matrix ad = eye + a * h + a2 * (h * h / 2.0);
  const Matrix bd = (eye * h + a * (h * h / 2.0) + a2 * (h * h * h / 6.0)) * b;
  Matrix q = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) q(i, i) = d.state_weights[i];
  Matrix r = Matrix::Zero(2, 2);
  for (int i = 0; i < 2; ++i) r(i, i) = d.control_weights[i];
  const Matrix p = solve_dare(ad, bd, q, r);
  LaneKeepingGains out;
  out.k = (r + bd.transpose() * p * bd).ldlt().solve(bd.transpose() * p * ad);
  return out;
}

Eigen::Vector2d vehicle_nominal(const double* z, double y_ref, double psi_ref, double v_d,
                                const LaneKeepingGains& gains, double a_bar, double omega_bar) {
  const double heading = std::remainder(z[kPsi] - psi_ref, 2.0 * std::numbers::pi);
  const Eigen::Vector4d e(z[kY] - y_ref, heading, z[kBeta], z[kV] - v_d);
  Eigen::Vector2d u = -gains.k * e;
  u[0] = std::clamp(u[0], -a_bar, a_bar);
  u[1] = clamp_steering(z[kBeta], std::clamp(u[1], -omega_bar, omega_bar));
  return u;
}

}  // namespace riskgate
