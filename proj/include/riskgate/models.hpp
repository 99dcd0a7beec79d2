#pragma once

#include <array>

#include "riskgate/sde.hpp"

namespace riskgate {

// dx = u dt + diag(sigma_x, sigma_y) dw on the plane.
SdeModel single_integrator_model(double sigma_x, double sigma_y);

// Kinematic bicycle, state z = (x, y, psi, v, beta), control (a, omega).
// v is the rear-wheel speed and beta the slip angle of the c.g.
struct BicycleParams {
  double l_f = 1.5;
  double l_r = 1.5;
};

// Index of each state component inside one vehicle block.
enum BicycleIndex : int { kX = 0, kY = 1, kPsi = 2, kV = 3, kBeta = 4 };
inline constexpr int kBicycleDim = 5;

// Planar velocity of the c.g. and its derivatives with respect to
// (psi, v, beta). Shared by the dynamics and by every barrier that previews
// motion.
struct PlanarVelocity {
  std::array<double, 2> w{};                       // (x_dot, y_dot)
  std::array<std::array<double, 3>, 2> jacobian{};  // d w_k / d(psi, v, beta)
  std::array<Eigen::Matrix3d, 2> hessian;          // d^2 w_k / d(psi, v, beta)^2
};
PlanarVelocity planar_velocity(double psi, double v, double beta);

// Drift of one vehicle with its control folded in (a, omega enter linearly).
Eigen::Matrix<double, 5, 1> bicycle_rates(const BicycleParams& params, const double* z, double a, double omega);

// Single-vehicle stochastic model; noise acts on v and beta only, so q = 2.
SdeModel bicycle_model(const BicycleParams& params, double sigma_a, double sigma_omega);

// Zeroes an omega command that would push |beta| further past beta_limit.
double clamp_steering(double beta, double omega, double beta_limit = 1.4);

// Aerodynamic-drag scale 0.1 + 5 v + 0.25 v^2 used to size the acceleration noise.
double drag_acceleration(double speed);

struct IdmParams {
  double desired_speed = 30.0;  // v0
  double time_gap = 0.5;        // tau_gap
  double jam_distance = 2.0;    // s0
  double max_accel = 2.0;       // a_max
  double comfort_decel = 2.0;   // b_c
  double hard_decel = 6.0;      // lower clamp on the returned acceleration
  double exponent = 4.0;
};

// Intelligent driver model. `gap` is bumper to bumper; pass +infinity for a
// free road. Throws DomainError when gap <= 0.
double idm_accel(double v, double v_lead, double gap, const IdmParams& params);

// u0 = -k (z - goal), each component clipped to [-limit, limit].
Vector robot_nominal(const Vector& z, const Vector& goal, double gain, double limit);

// Infinite-horizon discrete Riccati solution P of
//   P = Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A.
Matrix solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, double tol = 1e-12,
                  int max_iterations = 200000);

// State feedback u = -K e for lane and speed tracking, where
//   e = (y - y_ref, psi - psi_ref, beta, v - v_d), u = (a, omega).
// K comes from a discrete Riccati solve on the straight-road linearization at
// v_d, discretized with step `design_dt`.
struct LaneKeepingGains {
  Eigen::Matrix<double, 2, 4> k = Eigen::Matrix<double, 2, 4>::Zero();
};

struct LaneKeepingDesign {
  double v_d = 30.0;
  double l_r = 1.5;
  double design_dt = 0.01;
  std::array<double, 4> state_weights{1.0, 1.0, 1.0, 1.0};
  std::array<double, 2> control_weights{1.0, 1.0};
};
LaneKeepingGains lane_keeping_gains(const LaneKeepingDesign& design);

// Saturated (a, omega) toward lane centre y_ref with reference heading
// psi_ref and speed v_d.
Eigen::Vector2d vehicle_nominal(const double* z, double y_ref, double psi_ref, double v_d,
                                const LaneKeepingGains& gains, double a_bar, double omega_bar);

}  // namespace riskgate
