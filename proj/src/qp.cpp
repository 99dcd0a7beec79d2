#include "riskgate/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace riskgate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Regularization of the min-max-violation fallback; ties are broken toward u0.
constexpr double kFallbackRegularization = 1e-8;

}  // namespace

const char* to_string(QpStatus status) {
  return status == QpStatus::optimal ? "optimal" : "infeasible";
}

QpSolution solve_qp(const QpProblem& problem) {
  const auto n = problem.hessian.rows();
  const auto rows = problem.constraints.rows();
  if (problem.hessian.cols() != n || problem.linear.size() != n) throw ContractViolation("QP objective shape mismatch");
  if (rows > 0 && problem.constraints.cols() != n) throw ContractViolation("QP constraint matrix has wrong width");
  if (problem.bounds.size() != rows) throw ContractViolation("QP bound vector has wrong length");

  Eigen::LLT<Matrix> llt(problem.hessian);
  if (llt.info() != Eigen::Success) throw ContractViolation("QP Hessian is not positive definite");
  const Matrix lower = llt.matrixL();
  const Matrix lower_inv = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));

  QpSolution out;
  out.z = -llt.solve(problem.linear);

  Vector row_norm(rows);
  for (Eigen::Index i = 0; i < rows; ++i) row_norm[i] = std::max(problem.constraints.row(i).norm(), 1e-300);

  auto slack = [&](Eigen::Index i) { return problem.bounds[i] - problem.constraints.row(i).dot(out.z); };
  auto tolerance = [&](Eigen::Index i) {
    return 1e-12 * std::max({1.0, std::abs(problem.bounds[i]), row_norm[i] * out.z.lpNorm<Eigen::Infinity>()});
  };

  std::vector<int> active;
  std::vector<double> mult;
  std::vector<char> is_active(rows, 0);
  const int max_iterations = 50 * static_cast<int>(rows + n) + 50;

  while (true) {
    // Most violated inactive row, measured as distance to its hyperplane.
    Eigen::Index pick = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (is_active[i]) continue;
      const double s = slack(i);
      if (s < -tolerance(i) && s / row_norm[i] < worst) {
        worst = s / row_norm[i];
        pick = i;
      }
    }
    if (pick < 0) break;

    const Vector normal = -problem.constraints.row(pick).transpose();
    double pick_mult = 0.0;
    bool added = false;
    while (!added) {
      if (++out.iterations > max_iterations) throw std::runtime_error("solve_qp: iteration limit reached");
      const auto q = static_cast<Eigen::Index>(active.size());
      Matrix working(n, q);
      for (Eigen::Index j = 0; j < q; ++j) working.col(j) = -problem.constraints.row(active[j]).transpose();
      Matrix q_factor = Matrix::Identity(n, n);
      Matrix r_factor(q, q);
      if (q > 0) {
        Eigen::HouseholderQR<Matrix> qr(lower_inv * working);
        q_factor = qr.householderQ() * Matrix::Identity(n, n);
        r_factor = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
      }
      const Matrix basis = lower_inv.transpose() * q_factor;
      const Vector d = basis.transpose() * normal;
      const Vector primal_step = basis.rightCols(n - q) * d.tail(n - q);
      Vector dual_step(q);
      if (q > 0) dual_step = r_factor.triangularView<Eigen::Upper>().solve(d.head(q));

      double partial = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (dual_step[j] > 1e-14 && mult[j] / dual_step[j] < partial) {
          partial = mult[j] / dual_step[j];
          drop = j;
        }
      }
      const double curvature = primal_step.dot(normal);
      const bool can_move = primal_step.norm() > 1e-13 * std::max(1.0, normal.norm()) && curvature > 0.0;
      const double full = can_move ? -slack(pick) / curvature : kInf;

      if (!std::isfinite(partial) && !std::isfinite(full)) {
        out.status = QpStatus::infeasible;
        break;
      }
      const double step = std::min(partial, full);
      if (std::isfinite(full)) out.z += step * primal_step;
      for (Eigen::Index j = 0; j < q; ++j) mult[j] -= step * dual_step[j];
      pick_mult += step;

      if (step == full) {
        active.push_back(static_cast<int>(pick));
        mult.push_back(pick_mult);
        is_active[pick] = 1;
        added = true;
      } else {
        is_active[active[drop]] = 0;
        active.erase(active.begin() + drop);
        mult.erase(mult.begin() + drop);
      }
    }
    if (out.status == QpStatus::infeasible) break;
  }

  out.multipliers = Vector::Zero(rows);
  for (std::size_t j = 0; j < active.size(); ++j) out.multipliers[active[j]] = std::max(mult[j], 0.0);
  out.active = active;
  out.objective = 0.5 * out.z.dot(problem.hessian * out.z) + problem.linear.dot(out.z);
  return out;
}

double kkt_residual(const QpProblem& problem, const Vector& z, const Vector& multipliers) {
  const Vector residual = problem.constraints * z - problem.bounds;
  double worst = (problem.hessian * z + problem.linear + problem.constraints.transpose() * multipliers)
                     .lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    worst = std::max({worst, residual[i], -multipliers[i], std::abs(multipliers[i] * residual[i])});
  }
  return worst;
}

QpProblem to_qp(const CbfQpProblem& problem) {
  const auto m = problem.nominal.size();
  const bool soft = std::any_of(problem.rows.begin(), problem.rows.end(), [](const ConstraintRow& r) { return r.c != 0.0; });
  if (soft && !(problem.slack_weight > 0.0)) throw ContractViolation("soft CBF rows need a positive slack weight");
  const bool boxed = problem.lower.size() > 0 || problem.upper.size() > 0;
  if (boxed && (problem.lower.size() != m || problem.upper.size() != m)) throw ContractViolation("box bounds have wrong length");
  for (Eigen::Index i = 0; boxed && i < m; ++i) {
    if (problem.lower[i] > problem.upper[i]) throw ContractViolation("box bounds must satisfy lower <= upper");
  }
  const Eigen::Index nvar = m + (soft ? 1 : 0);

  std::vector<std::pair<RowVector, double>> rows;
  for (const ConstraintRow& row : problem.rows) {
    if (row.a.size() != m) throw ContractViolation("CBF row '" + row.label + "' has wrong width");
    RowVector a = RowVector::Zero(nvar);
    a.head(m) = row.a;
    if (soft) a[m] = row.c;
    rows.emplace_back(a, -row.b);
  }
  for (Eigen::Index i = 0; boxed && i < m; ++i) {
    if (std::isfinite(problem.upper[i])) {
      RowVector a = RowVector::Zero(nvar);
      a[i] = 1.0;
      rows.emplace_back(a, problem.upper[i]);
    }
    if (std::isfinite(problem.lower[i])) {
      RowVector a = RowVector::Zero(nvar);
      a[i] = -1.0;
      rows.emplace_back(a, -problem.lower[i]);
    }
  }

  QpProblem qp;
  qp.hessian = Matrix::Identity(nvar, nvar);
  if (soft) qp.hessian(m, m) = problem.slack_weight;
  qp.linear = Vector::Zero(nvar);
  qp.linear.head(m) = -problem.nominal;
  qp.constraints.resize(static_cast<Eigen::Index>(rows.size()), nvar);
  qp.bounds.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.constraints.row(i) = rows[i].first;
    qp.bounds[i] = rows[i].second;
  }
  return qp;
}

namespace {

double row_violation(const CbfQpProblem& problem, const Vector& u, double delta) {
  double worst = 0.0;
  for (const ConstraintRow& row : problem.rows) worst = std::max(worst, row.a.dot(u) + row.b + row.c * delta);
  return worst;
}

// Smallest slack that satisfies every soft row at u.
double slack_for(const CbfQpProblem& problem, const Vector& u) {
  double delta = 0.0;
  for (const ConstraintRow& row : problem.rows) {
    if (row.c < 0.0) delta = std::max(delta, (row.a.dot(u) + row.b) / -row.c);
  }
  return delta;
}

Vector min_max_violation(const CbfQpProblem& problem) {
  const auto m = problem.nominal.size();
  std::vector<const ConstraintRow*> hard;
  for (const ConstraintRow& row : problem.rows) {
    if (row.c == 0.0) hard.push_back(&row);
  }
  const bool boxed = problem.lower.size() > 0;
  QpProblem qp;
  qp.hessian = kFallbackRegularization * Matrix::Identity(m + 1, m + 1);
  qp.linear = Vector::Zero(m + 1);
  qp.linear.head(m) = -kFallbackRegularization * problem.nominal;
  qp.linear[m] = 1.0;
  std::vector<std::pair<RowVector, double>> rows;
  for (const ConstraintRow* row : hard) {
    RowVector a(m + 1);
    a.head(m) = row->a;
    a[m] = -1.0;
    rows.emplace_back(a, -row->b);
  }
  for (Eigen::Index i = 0; boxed && i < m; ++i) {
    RowVector a = RowVector::Zero(m + 1);
    if (std::isfinite(problem.upper[i])) {
      a[i] = 1.0;
      rows.emplace_back(a, problem.upper[i]);
    }
    if (std::isfinite(problem.lower[i])) {
      a[i] = -1.0;
      rows.emplace_back(a, -problem.lower[i]);
    }
  }
  qp.constraints.resize(static_cast<Eigen::Index>(rows.size()), m + 1);
  qp.bounds.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    qp.constraints.row(i) = rows[i].first;
    qp.bounds[i] = rows[i].second;
  }
  return solve_qp(qp).z.head(m);
}

}  // namespace

namespace {

// The unconstrained minimizer (u0, 0) is the answer whenever it is feasible.
bool nominal_feasible(const CbfQpProblem& problem) {
  const auto m = problem.nominal.size();
  if (problem.lower.size() > 0 || problem.upper.size() > 0) {
    if (problem.lower.size() != m || problem.upper.size() != m) return false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (problem.nominal[i] < problem.lower[i] || problem.nominal[i] > problem.upper[i]) return false;
    }
  }
  for (const ConstraintRow& row : problem.rows) {
    if (row.a.size() != m || row.a.dot(problem.nominal) + row.b > 0.0) return false;
  }
  return true;
}

bool feasible(const CbfQpProblem& problem, const Vector& u, double slack_tol) {
  for (Eigen::Index i = 0; i < problem.lower.size(); ++i) {
    if (u[i] < problem.lower[i] - slack_tol || u[i] > problem.upper[i] + slack_tol) return false;
  }
  for (const ConstraintRow& row : problem.rows) {
    if (row.a.dot(u) + row.b > slack_tol * std::max(1.0, std::abs(row.b))) return false;
  }
  return true;
}

// With one violated hard row, projecting u0 onto it minimizes the relaxed
// problem; when that point satisfies everything else it is the optimum.
bool single_row_projection(const CbfQpProblem& problem, CbfQpSolution& out) {
  int violated = -1;
  for (std::size_t j = 0; j < problem.rows.size(); ++j) {
    const ConstraintRow& row = problem.rows[j];
    if (row.a.dot(problem.nominal) + row.b > 0.0) {
      if (violated >= 0 || row.c != 0.0) return false;
      violated = static_cast<int>(j);
    }
  }
  if (violated < 0) return false;
  const ConstraintRow& row = problem.rows[violated];
  const double norm2 = row.a.squaredNorm();
  if (!(norm2 > 0.0)) return false;
  const double lambda = (row.a.dot(problem.nominal) + row.b) / norm2;
  Vector u = problem.nominal - lambda * row.a.transpose();
  if (!feasible(problem, u, 1e-12)) return false;
  out.u = std::move(u);
  out.row_multipliers = Vector::Zero(static_cast<Eigen::Index>(problem.rows.size()));
  out.row_multipliers[violated] = lambda;
  return true;
}

}  // namespace

CbfQpSolution solve_cbf_qp(const CbfQpProblem& problem) {
  const auto m = problem.nominal.size();
  if (nominal_feasible(problem)) {
    CbfQpSolution out;
    out.u = problem.nominal;
    out.row_multipliers = Vector::Zero(static_cast<Eigen::Index>(problem.rows.size()));
    return out;
  }
  if (problem.lower.size() == problem.upper.size() && (problem.lower.size() == m || problem.lower.size() == 0)) {
    CbfQpSolution quick;
    if (single_row_projection(problem, quick)) {
      quick.max_violation = row_violation(problem, quick.u, 0.0);
      return quick;
    }
  }
  const QpProblem qp = to_qp(problem);
  const QpSolution sol = solve_qp(qp);

  CbfQpSolution out;
  if (sol.status == QpStatus::optimal) {
    out.u = sol.z.head(m);
    out.delta = qp.hessian.rows() > m ? sol.z[m] : 0.0;
    out.row_multipliers = sol.multipliers.head(static_cast<Eigen::Index>(problem.rows.size()));
  } else {
    out.status = QpStatus::infeasible;
    out.u = min_max_violation(problem);
    out.delta = slack_for(problem, out.u);
  }
  out.max_violation = row_violation(problem, out.u, out.delta);
  return out;
}

}  // namespace riskgate
