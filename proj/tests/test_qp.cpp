#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "riskgate/qp.hpp"

using namespace riskgate;

TEST(CbfQp, NoRowsReturnsNominal) {
  CbfQpProblem p;
  p.nominal = (Vector(2) << 0.3, -0.4).finished();
  p.lower = Vector::Constant(2, -1.0);
  p.upper = Vector::Constant(2, 1.0);
  const CbfQpSolution s = solve_cbf_qp(p);
  EXPECT_EQ(s.status, QpStatus::optimal);
  EXPECT_EQ(s.u, p.nominal);
  EXPECT_EQ(s.delta, 0.0);
}

TEST(CbfQp, ScalarClamp) {
  CbfQpProblem p;
  p.nominal = Vector::Ones(1);
  p.rows.push_back({RowVector::Ones(1), -0.5, 0.0, "r"});
  const CbfQpSolution s = solve_cbf_qp(p);
  EXPECT_NEAR(s.u[0], 0.5, 1e-15);
}

TEST(CbfQp, SingleRowProjection) {
  CbfQpProblem p;
  p.nominal = (Vector(2) << 2.0, 0.0).finished();
  p.rows.push_back({(RowVector(2) << 1.0, 1.0).finished(), -1.0, 0.0, "r"});
  p.lower = Vector::Constant(2, -10.0);
  p.upper = Vector::Constant(2, 10.0);
  const CbfQpSolution s = solve_cbf_qp(p);
  EXPECT_NEAR(s.u[0], 1.5, 1e-14);
  EXPECT_NEAR(s.u[1], -0.5, 1e-14);
  EXPECT_NEAR(s.row_multipliers[0], 0.5, 1e-14);
}

TEST(CbfQp, SoftRowUsesSlack) {
  // u <= -5 is out of the box; a soft row trades slack against control
  CbfQpProblem p;
  p.nominal = Vector::Zero(1);
  p.slack_weight = 1.0;
  p.rows.push_back({RowVector::Ones(1), 5.0, -1.0, "soft"});
  p.lower = Vector::Constant(1, -1.0);
  p.upper = Vector::Constant(1, 1.0);
  const CbfQpSolution s = solve_cbf_qp(p);
  EXPECT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.u[0], -1.0, 1e-12);
  EXPECT_NEAR(s.delta, 4.0, 1e-12);
}

TEST(CbfQp, InfeasibleMinimizesWorstViolation) {
  // u >= 3 and u <= -3 inside [-1, 1]: best compromise is u = 0 with violation 3
  CbfQpProblem p;
  p.nominal = Vector::Constant(1, 0.7);
  p.rows.push_back({-RowVector::Ones(1), 3.0, 0.0, "up"});
  p.rows.push_back({RowVector::Ones(1), 3.0, 0.0, "down"});
  p.lower = Vector::Constant(1, -1.0);
  p.upper = Vector::Constant(1, 1.0);
  const CbfQpSolution s = solve_cbf_qp(p);
  EXPECT_EQ(s.status, QpStatus::infeasible);
  EXPECT_NEAR(s.u[0], 0.0, 1e-6);
  EXPECT_NEAR(s.max_violation, 3.0, 1e-6);
}

TEST(CbfQp, ContractChecks) {
  CbfQpProblem p;
  p.nominal = Vector::Zero(2);
  p.rows.push_back({RowVector::Ones(3), 0.0, 0.0, "wide"});
  EXPECT_THROW(solve_cbf_qp(p), ContractViolation);
  p.rows.clear();
  p.lower = Vector::Constant(2, 1.0);
  p.upper = Vector::Constant(2, -1.0);
  EXPECT_THROW(solve_cbf_qp(p), ContractViolation);
}

TEST(DenseQp, MatchesBruteForce) {
  std::mt19937_64 gen(2024);
  for (int k = 0; k < 300; ++k) {
    const CbfQpProblem cbf = oracle::random_cbf_qp(gen);
    const QpProblem qp = to_qp(cbf);
    const QpSolution s = solve_qp(qp);
    const oracle::BruteForceQp ref = oracle::brute_force_qp(qp);
    ASSERT_TRUE(ref.feasible);
    ASSERT_EQ(s.status, QpStatus::optimal);
    EXPECT_LE(kkt_residual(qp, s.z, s.multipliers), 1e-8) << k;
    EXPECT_NEAR(oracle::qp_objective(qp, s.z), ref.objective, 1e-10) << k;

    // the filter entry point, fast paths included, lands on the same optimum
    const CbfQpSolution f = solve_cbf_qp(cbf);
    Vector z(qp.hessian.rows());
    z.head(f.u.size()) = f.u;
    if (z.size() > f.u.size()) z[f.u.size()] = f.delta;
    EXPECT_NEAR(oracle::qp_objective(qp, z), ref.objective, 1e-10) << k;
  }
}

TEST(DenseQp, GeneralHessian) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 4;
    const int rows = k % 7;
    Matrix m(n, n);
    for (int i = 0; i < n * n; ++i) m.data()[i] = nd(gen);
    QpProblem qp;
    qp.hessian = m * m.transpose() + 0.1 * Matrix::Identity(n, n);
    qp.linear = Vector(n);
    for (int i = 0; i < n; ++i) qp.linear[i] = 3.0 * nd(gen);
    qp.constraints = Matrix(rows, n);
    for (int i = 0; i < rows * n; ++i) qp.constraints.data()[i] = nd(gen);
    qp.bounds = Vector(rows);
    for (int i = 0; i < rows; ++i) qp.bounds[i] = std::abs(nd(gen));  // z = 0 is feasible
    const QpSolution s = solve_qp(qp);
    const oracle::BruteForceQp ref = oracle::brute_force_qp(qp);
    ASSERT_TRUE(ref.feasible);
    EXPECT_LE(kkt_residual(qp, s.z, s.multipliers), 1e-8) << k;
    EXPECT_NEAR(oracle::qp_objective(qp, s.z), ref.objective, 1e-10 * (1 + std::abs(ref.objective))) << k;
  }
}

TEST(DenseQp, ReportsInfeasible) {
  QpProblem qp;
  qp.hessian = Matrix::Identity(1, 1);
  qp.linear = Vector::Zero(1);
  qp.constraints = (Matrix(2, 1) << 1.0, -1.0).finished();
  qp.bounds = (Vector(2) << -1.0, -1.0).finished();  // z <= -1 and z >= 1
  EXPECT_EQ(solve_qp(qp).status, QpStatus::infeasible);
}
