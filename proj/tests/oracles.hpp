#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Nothing here calls into the solver it checks.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "riskgate/qp.hpp"

namespace riskgate::oracle {

struct BruteForceQp {
  bool feasible = false;
  Vector z;
  double objective = std::numeric_limits<double>::infinity();
};

inline double qp_objective(const QpProblem& p, const Vector& z) {
  return 0.5 * z.dot(p.hessian * z) + p.linear.dot(z);
}

// Enumerates every candidate active set of at most n linearly independent
// rows, solves the equality-constrained KKT system, keeps the primal and
// dual feasible candidates and returns the one with the lowest objective.
// Strict convexity makes that candidate the unique optimum.
inline BruteForceQp brute_force_qp(const QpProblem& p, double tol = 1e-9) {
  const int n = static_cast<int>(p.hessian.rows());
  const int rows = static_cast<int>(p.constraints.rows());
  BruteForceQp best;
  for (unsigned mask = 0; mask < (1u << rows); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < rows; ++i)
      if (mask & (1u << i)) act.push_back(i);
    if (static_cast<int>(act.size()) > n) continue;
    const int k = static_cast<int>(act.size());
    Matrix kkt = Matrix::Zero(n + k, n + k);
    Vector rhs(n + k);
    kkt.topLeftCorner(n, n) = p.hessian;
    rhs.head(n) = -p.linear;
    for (int j = 0; j < k; ++j) {
      kkt.block(0, n + j, n, 1) = p.constraints.row(act[j]).transpose();
      kkt.block(n + j, 0, 1, n) = p.constraints.row(act[j]);
      rhs[n + j] = p.bounds[act[j]];
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(n);
    bool ok = (sol.tail(k).array() >= -tol).all();
    if (rows > 0) ok = ok && ((p.constraints * z - p.bounds).array() <= tol).all();
    if (!ok) continue;
    const double f = qp_objective(p, z);
    if (f < best.objective) {
      best.feasible = true;
      best.z = z;
      best.objective = f;
    }
  }
  return best;
}

// Random CBF-QP with m <= 4 controls and at most 6 rows, feasible by
// construction: hard rows pass through a margin around a point inside the
// box. Roughly a third of the problems carry one soft row.
inline CbfQpProblem random_cbf_qp(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> count(0, 6);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const int m = dim(gen);
  const int rows = count(gen);
  CbfQpProblem p;
  p.nominal = Vector(m);
  for (int i = 0; i < m; ++i) p.nominal[i] = 4.0 * unit(gen);
  p.lower = Vector::Constant(m, -2.0 - 2.0 * pos(gen));
  p.upper = Vector::Constant(m, 2.0 + 2.0 * pos(gen));
  Vector inside(m);
  for (int i = 0; i < m; ++i) inside[i] = 1.5 * unit(gen);
  const bool soft = pos(gen) < 0.33;
  p.slack_weight = 10.0 + 100.0 * pos(gen);
  for (int r = 0; r < rows; ++r) {
    ConstraintRow row;
    row.a = RowVector(m);
    for (int i = 0; i < m; ++i) row.a[i] = unit(gen);
    row.b = -row.a.dot(inside) - 0.5 * pos(gen);
    if (soft && r == 0) row.c = -1.0;
    p.rows.push_back(row);
  }
  return p;
}

}  // namespace riskgate::oracle
