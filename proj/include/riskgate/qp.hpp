#pragma once

#include <string>
#include <vector>

#include "riskgate/types.hpp"

namespace riskgate {

// Strictly convex dense QP
//   minimize 1/2 z^T H z + c^T z   subject to   A z <= b.
struct QpProblem {
  Matrix hessian;
  Vector linear;
  Matrix constraints;
  Vector bounds;
};

enum class QpStatus { optimal, infeasible };

const char* to_string(QpStatus status);

struct QpSolution {
  QpStatus status = QpStatus::optimal;
  Vector z;
  Vector multipliers;       // one per constraint row, >= 0, zero off the active set
  std::vector<int> active;  // indices of active rows at termination
  double objective = 0.0;
  int iterations = 0;
};

// Dual active-set method of Goldfarb and Idnani. Starts from the
// unconstrained minimizer and adds the most violated row each major
// iteration; the working-set factorization is rebuilt from scratch, which is
// cheap at the sizes this solver targets (<= 9 variables, <= 82 rows).
QpSolution solve_qp(const QpProblem& problem);

// Stationarity, primal feasibility, dual feasibility and complementarity,
// each as an infinity norm; the largest is returned.
double kkt_residual(const QpProblem& problem, const Vector& z, const Vector& multipliers);

// One CBF constraint row:  a . u + b + c delta <= 0.
struct ConstraintRow {
  RowVector a;
  double b = 0.0;
  double c = 0.0;
  std::string label;
};

// min 1/2 |u - u0|^2 + 1/2 w delta^2  s.t. rows and lower <= u <= upper.
struct CbfQpProblem {
  Vector nominal;
  double slack_weight = 1e4;
  std::vector<ConstraintRow> rows;
  Vector lower;
  Vector upper;
};

struct CbfQpSolution {
  QpStatus status = QpStatus::optimal;
  Vector u;
  double delta = 0.0;
  Vector row_multipliers;      // per CBF row; empty on the infeasible fallback
  double max_violation = 0.0;  // max_j (a_j u + b_j + c_j delta), clipped at 0
};

// Solves the CBF-QP. When the hard rows cannot be met inside the box the
// status is `infeasible` and `u` minimizes the largest hard-row violation
// over the box (a linear program, solved here as a lightly regularized QP).
CbfQpSolution solve_cbf_qp(const CbfQpProblem& problem);

// Builds the underlying QP (variables u, then delta when a row is soft).
QpProblem to_qp(const CbfQpProblem& problem);

}  // namespace riskgate
