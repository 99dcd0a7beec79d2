#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "riskgate/barrier.hpp"
#include "riskgate/models.hpp"
#include "riskgate/rng.hpp"
#include "riskgate/scenarios.hpp"
#include "riskgate/simulate.hpp"

using namespace riskgate;

namespace {

struct ConstantControl : Controller {
  Vector u;
  explicit ConstantControl(Vector v) : u(std::move(v)) {}
  ControlDecision decide(double, const Vector&) override { return {u, false}; }
};

}  // namespace

TEST(EulerMaruyama, ZeroDynamics) {
  SdeModel zero = single_integrator_model(0.0, 0.0);
  const Vector x = Vector::Constant(2, 0.7);
  EXPECT_EQ(euler_maruyama_step(zero, x, Vector::Zero(2), 0.001, Vector::Ones(2)), x);
}

TEST(EulerMaruyama, DeterministicAndNoisyStep) {
  const Vector x = Vector::Zero(2);
  const Vector a = euler_maruyama_step(single_integrator_model(0, 0), x, Vector::Unit(2, 0), 0.1, Vector::Zero(2));
  EXPECT_NEAR(a[0], 0.1, 1e-15);
  EXPECT_EQ(a[1], 0.0);
  const Vector b = euler_maruyama_step(single_integrator_model(0.003, 0.003), x, Vector::Zero(2), 0.001, Vector::Ones(2));
  EXPECT_NEAR(b[0], 9.48683298050514e-05, 1e-18);
  EXPECT_NEAR(b[1], 9.48683298050514e-05, 1e-18);
}

TEST(EulerMaruyama, ShapeAndFiniteness) {
  SdeModel m = single_integrator_model(0.1, 0.1);
  EXPECT_THROW(euler_maruyama_step(m, Vector::Zero(3), Vector::Zero(2), 0.01, Vector::Zero(2)), ContractViolation);
  EXPECT_THROW(euler_maruyama_step(m, Vector::Zero(2), Vector::Zero(1), 0.01, Vector::Zero(2)), ContractViolation);
  Vector bad = Vector::Zero(2);
  bad[0] = std::nan("");
  EXPECT_THROW(euler_maruyama_step(m, Vector::Zero(2), bad, 0.01, Vector::Zero(2)), IntegrationFault);
}

TEST(Generator, RobotHandValue) {
  const SdeModel m = single_integrator_model(0.003, 0.003);
  const BarrierSpec b = robot_barrier(1.0);
  const Vector x = (Vector(2) << 0.5, 0.0).finished();
  EXPECT_NEAR(generator(m, b, x, Vector::Unit(2, 0)), 1.000018, 1e-14);
  EXPECT_EQ(generator(single_integrator_model(0, 0), b, x, Vector::Zero(2)), 0.0);
  const RowVector s = sigma_lie(m, b, x);
  EXPECT_NEAR(s[0], 0.003, 1e-16);
  EXPECT_NEAR(s[1], 0.0, 1e-16);
  EXPECT_THROW(generator(m, b, x, Vector::Zero(3)), ContractViolation);
}

TEST(Generator, DecompositionIsAffineInControl) {
  const SdeModel m = bicycle_model({}, 0.5, 0.1);
  const BarrierSpec b = road_barrier(RoadGeometry::straight(0.05, 3.0, 0.0));
  const Vector x = (Vector(5) << 10.0, 0.4, 0.02, 28.0, 0.01).finished();
  const GeneratorSplit s = generator_decomposition(m, b, x);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    const Vector u = (Vector(2) << nd(gen), nd(gen)).finished();
    EXPECT_NEAR(generator(m, b, x, u), s.drift_part + s.control_row.dot(u), 1e-12 * (1 + std::abs(s.drift_part)));
  }
}

TEST(Barriers, RobotDiskValues) {
  const BarrierSpec b = robot_barrier(1.0);
  EXPECT_DOUBLE_EQ(b.value((Vector(2) << 1.0, 0.0).finished()), 1.0);
  EXPECT_DOUBLE_EQ(b.value((Vector(2) << 0.6, 0.8).finished()), 1.0);
  EXPECT_NEAR(b.value((Vector(2) << std::sqrt(0.5), 0.0).finished()), 0.5, 1e-15);
}

TEST(Barriers, RoadCentreAndEdge) {
  const RoadGeometry road = RoadGeometry::straight(0.0, 3.0, 3.0);
  const BarrierSpec b = road_barrier(road);
  Vector z(5);
  z << 0.0, 3.0, 0.0, 0.0, 0.0;
  EXPECT_NEAR(road_margin(road, z.data()), 4.5, 1e-14);
  EXPECT_NEAR(b.value(z), 0.011108996538242306, 1e-15);
  z[1] = 4.5;
  EXPECT_NEAR(b.value(z), 1.0, 1e-14);
}

TEST(Barriers, CollisionClosestApproach) {
  CollisionParams p;
  p.d_min = 4.0;
  p.horizon = 5.0;
  p.relax = 0.1;
  double ego[5] = {0.0, 0.0, 0.0, 10.0, 0.0};
  double other[5] = {20.0, 0.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(collision_margin(p, ego, other), 22.4, 1e-12);
  EXPECT_NEAR(collision_closest_time(p, ego, other), 2.0, 1e-15);
  // stationary pair, tau* = 0
  double still[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
  double apart[5] = {0.0, 7.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(collision_margin(p, still, apart), 1.1 * (49.0 - 16.0), 1e-12);
  // diverging pair, tau* clamps at 0
  double ahead[5] = {20.0, 0.0, 0.0, 15.0, 0.0};
  EXPECT_NEAR(collision_margin(p, ego, ahead), 1.1 * (400.0 - 16.0), 1e-12);
  // coincident positions are unsafe, not an error
  const BarrierSpec b = collision_barrier(p, 0, 5, "c");
  Vector x = Vector::Zero(10);
  EXPECT_GE(b.value(x), 1.0);
}

TEST(Barriers, CollisionLateralWeightShrinksKeepOut) {
  CollisionParams p;
  double ego[5] = {0.0, 0.0, 0.0, 30.0, 0.0};
  double side[5] = {0.0, 3.0, 0.0, 30.0, 0.0};
  EXPECT_LT(collision_margin(p, ego, side), 0.0);
  p.lateral_weight = 3.0;
  EXPECT_GT(collision_margin(p, ego, side), 0.0);
  EXPECT_THROW(collision_barrier({4.0, 1.0, 0.1, 1.0, 0.0}, 0, 5, "c"), ContractViolation);
}

TEST(Barriers, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vector> disk;
  for (int i = 0; i < 50; ++i) disk.push_back((Vector(2) << u(gen), u(gen)).finished());
  EXPECT_TRUE(check_derivatives(robot_barrier(1.0), disk).ok);

  RoadGeometry road;
  road.ramp_angle = 0.05;
  road.merge_x = 1e9;
  road.lane_center = 0.0;
  std::vector<Vector> cars;
  for (int i = 0; i < 50; ++i) {
    cars.push_back((Vector(5) << -50.0 + 10.0 * u(gen), 0.8 * u(gen), 0.05 * u(gen), 25.0 + 3.0 * u(gen),
                    0.02 * u(gen))
                       .finished());
  }
  const DerivativeCheck road_check = check_derivatives(road_barrier(road), cars);
  EXPECT_TRUE(road_check.ok) << road_check.detail;

  CollisionParams p;
  p.length = 3.0;
  p.lateral_weight = 2.0;
  std::vector<Vector> pairs;
  while (pairs.size() < 50) {
    Vector x(10);
    x << 0.0, 0.5 * u(gen), 0.05 * u(gen), 25.0, 0.02 * u(gen), 12.0 + 4.0 * u(gen), 3.0 * u(gen), 0.05 * u(gen),
        28.0 + 4.0 * u(gen), 0.02 * u(gen);
    const double tau = collision_closest_time(p, x.data(), x.data() + 5);
    // the clamp on tau* is only C1; keep the stencil away from it
    if (std::abs(tau) < 0.05 || std::abs(tau - p.horizon) < 0.05) continue;
    pairs.push_back(x);
  }
  const DerivativeCheck coll_check = check_derivatives(collision_barrier(p, 0, 5, "c"), pairs);
  EXPECT_TRUE(coll_check.ok) << coll_check.detail;
}

TEST(Barriers, HessianIsSymmetric) {
  CollisionParams p;
  const BarrierSpec b = collision_barrier(p, 0, 5, "c");
  Vector x(10);
  x << 0.0, 0.3, 0.01, 25.0, 0.0, 10.0, 2.0, 0.0, 30.0, 0.01;
  const Matrix h = b.hessian(x);
  EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12 * (1 + h.cwiseAbs().maxCoeff()));
}

TEST(SimulateTrial, DeterministicSafeRun) {
  const SdeModel m = single_integrator_model(0.0, 0.0);
  ConstantControl c(Vector::Zero(2));
  const TrajectoryRecord r = simulate_trial(m, c, {robot_barrier(1.0)}, (Vector(2) << 0.3, 0.0).finished(),
                                            {1.0, 0.001, 1});
  EXPECT_FALSE(r.stopped);
  EXPECT_FALSE(r.tau.has_value());
  EXPECT_EQ(r.steps(), 1001u);
}

TEST(SimulateTrial, StopsAtAnalyticCrossing) {
  const SdeModel m = single_integrator_model(0.0, 0.0);
  ConstantControl c(Vector::Unit(2, 0));
  const double dt = 0.001;
  const TrajectoryRecord r =
      simulate_trial(m, c, {robot_barrier(1.0)}, (Vector(2) << std::sqrt(0.5), 0.0).finished(), {1.0, dt, 1});
  ASSERT_TRUE(r.stopped);
  ASSERT_TRUE(r.tau.has_value());
  EXPECT_NEAR(*r.tau, 1.0 - std::sqrt(0.5), dt);
  EXPECT_EQ(*r.exit_barrier, 0);
  // stopped process: frozen after the exit
  EXPECT_EQ(r.states.col(r.states.cols() - 1), r.states.col(static_cast<Eigen::Index>(std::llround(*r.tau / dt))));
}

TEST(SimulateTrial, RejectsUnsafeStart) {
  const SdeModel m = single_integrator_model(0.0, 0.0);
  ConstantControl c(Vector::Zero(2));
  EXPECT_THROW(simulate_trial(m, c, {robot_barrier(1.0)}, Vector::Ones(2), {1.0, 0.001, 1}), ContractViolation);
}

TEST(SimulateTrial, SeedReproducible) {
  const SdeModel m = single_integrator_model(0.3, 0.3);
  ConstantControl c1(Vector::Zero(2)), c2(Vector::Zero(2)), c3(Vector::Zero(2));
  const Vector x0 = Vector::Zero(2);
  const auto a = simulate_trial(m, c1, {robot_barrier(1.0)}, x0, {1.0, 0.01, 77});
  const auto b = simulate_trial(m, c2, {robot_barrier(1.0)}, x0, {1.0, 0.01, 77});
  const auto d = simulate_trial(m, c3, {robot_barrier(1.0)}, x0, {1.0, 0.01, 78});
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, d.states);
}

TEST(SimulateTrial, MaxBarrierNeverBelowStart) {
  const SdeModel m = single_integrator_model(0.2, 0.2);
  for (std::uint64_t s = 0; s < 20; ++s) {
    ConstantControl c(Vector::Zero(2));
    const Vector x0 = (Vector(2) << 0.4, 0.1).finished();
    const auto r = simulate_trial(m, c, {robot_barrier(1.0)}, x0, {1.0, 0.01, s});
    EXPECT_GE(r.max_barrier()[0], robot_barrier(1.0).value(x0));
    EXPECT_LE(r.max_barrier()[0], r.stopped ? INFINITY : 1.0);
  }
}

TEST(Generator, DifferenceQuotientIncludingStepBias) {
  // For B = |x|^2 one Euler-Maruyama step gives exactly
  //   E[B(x_dt) - B(x)] / dt = generator + |u|^2 dt,
  // so the Monte Carlo mean must match that to a few standard errors at any point.
  const double sigma = 0.003, dt = 1e-4;
  const int n = 200000;
  const SdeModel m = single_integrator_model(sigma, sigma);
  const BarrierSpec b = robot_barrier(1.0);
  const double pts[4][4] = {{0.0, 0.0, 0.5, 0.5}, {0.1, 0.9, 4.0, -4.0}, {-0.7, 0.2, 0.0, -3.0}, {0.5, 0.0, 1.0, 0.0}};
  for (const auto& p : pts) {
    const Vector x = (Vector(2) << p[0], p[1]).finished();
    const Vector u = (Vector(2) << p[2], p[3]).finished();
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
      const Vector xi = (Vector(2) << normal_draw(31, k, 0), normal_draw(31, k, 1)).finished();
      const double q = (b.value(euler_maruyama_step(m, x, u, dt, xi)) - b.value(x)) / dt;
      s += q;
      s2 += q * q;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - generator(m, b, x, u) - u.squaredNorm() * dt), 4.0 * se) << p[0] << "," << p[1];
  }
}
