#include "riskgate/barrier.hpp"

#include <algorithm>
#include <cmath>

namespace riskgate {

namespace {

// Rows of `m` restricted to the barrier support.
Matrix gather_rows(const BarrierSpec& barrier, const Matrix& m) {
  if (barrier.support.empty()) return m;
  Matrix out(barrier.support.size(), m.cols());
  for (std::size_t i = 0; i < barrier.support.size(); ++i) out.row(i) = m.row(barrier.support[i]);
  return out;
}

Vector gather(const BarrierSpec& barrier, const Vector& v) {
  if (barrier.support.empty()) return v;
  Vector out(barrier.support.size());
  for (std::size_t i = 0; i < barrier.support.size(); ++i) out[i] = v[barrier.support[i]];
  return out;
}

Vector checked_gradient(const BarrierSpec& barrier, const Vector& x) {
  Vector grad = barrier.gradient(x);
  if (grad.size() != barrier.support_size(static_cast<int>(x.size()))) {
    throw ContractViolation("barrier '" + barrier.name + "' gradient has wrong length");
  }
  return grad;
}

double mixed_error(double analytic, double reference) {
  return std::abs(analytic - reference) / std::max(1.0, std::abs(reference));
}

}  // namespace

std::vector<double> BarrierSpec::resolved_levels() const {
  if (!levels.empty()) return levels;
  return {gamma, 1.0};
}

GeneratorSplit generator_decomposition(const ModelEval& eval, const BarrierSpec& barrier, const Vector& x) {
  const Vector grad = checked_gradient(barrier, x);
  const Matrix hess = barrier.hessian(x);
  if (hess.rows() != grad.size() || hess.cols() != grad.size()) {
    throw ContractViolation("barrier '" + barrier.name + "' Hessian has wrong shape");
  }
  const Matrix sigma = gather_rows(barrier, eval.diffusion);
  GeneratorSplit split;
  split.drift_part = grad.dot(gather(barrier, eval.drift)) + 0.5 * (sigma.transpose() * hess * sigma).trace();
  split.control_row = grad.transpose() * gather_rows(barrier, eval.control_matrix);
  return split;
}

GeneratorSplit generator_decomposition(const SdeModel& model, const BarrierSpec& barrier, const Vector& x) {
  return generator_decomposition(evaluate(model, x), barrier, x);
}

double generator(const SdeModel& model, const BarrierSpec& barrier, const Vector& x, const Vector& u) {
  if (u.size() != model.m) throw ContractViolation("control has length " + std::to_string(u.size()) +
                                                   ", model expects " + std::to_string(model.m));
  const GeneratorSplit split = generator_decomposition(model, barrier, x);
  return split.drift_part + split.control_row.dot(u);
}

RowVector sigma_lie(const ModelEval& eval, const BarrierSpec& barrier, const Vector& x) {
  return checked_gradient(barrier, x).transpose() * gather_rows(barrier, eval.diffusion);
}

RowVector sigma_lie(const SdeModel& model, const BarrierSpec& barrier, const Vector& x) {
  return sigma_lie(evaluate(model, x), barrier, x);
}

Vector full_gradient(const BarrierSpec& barrier, const Vector& x) {
  const Vector grad = checked_gradient(barrier, x);
  if (barrier.support.empty()) return grad;
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < barrier.support.size(); ++i) out[barrier.support[i]] = grad[i];
  return out;
}

DerivativeCheck check_derivatives(const BarrierSpec& barrier, const std::vector<Vector>& samples, double tol) {
  DerivativeCheck report;
  for (const Vector& x : samples) {
    const int dim = barrier.support_size(static_cast<int>(x.size()));
    const Vector grad = checked_gradient(barrier, x);
    const Matrix hess = barrier.hessian(x);
    for (int i = 0; i < dim; ++i) {
      const int idx = barrier.support.empty() ? i : barrier.support[i];
      // Five-point stencil; truncation is O(h^4), so h can stay large enough
      // that cancellation does not dominate at road-scale coordinates.
      const double step = 1e-4 * std::max(1.0, std::abs(x[idx]));
      auto shifted = [&](double k) {
        Vector y = x;
        y[idx] += k * step;
        return y;
      };
      const Vector p1 = shifted(1.0), m1 = shifted(-1.0), p2 = shifted(2.0), m2 = shifted(-2.0);
      const double fd = (8.0 * (barrier.value(p1) - barrier.value(m1)) - (barrier.value(p2) - barrier.value(m2))) /
                        (12.0 * step);
      report.worst_gradient_error = std::max(report.worst_gradient_error, mixed_error(grad[i], fd));
      const Vector fd_row =
          (8.0 * (barrier.gradient(p1) - barrier.gradient(m1)) - (barrier.gradient(p2) - barrier.gradient(m2))) /
          (12.0 * step);
      for (int j = 0; j < dim; ++j) {
        report.worst_hessian_error = std::max(report.worst_hessian_error, mixed_error(hess(i, j), fd_row[j]));
        const double scale = std::max({1.0, std::abs(hess(i, j)), std::abs(hess(j, i))});
        report.worst_asymmetry = std::max(report.worst_asymmetry, std::abs(hess(i, j) - hess(j, i)) / scale);
      }
    }
  }
  report.ok = report.worst_gradient_error <= tol && report.worst_hessian_error <= tol &&
              report.worst_asymmetry <= 1e-12;
  if (!report.ok) {
    report.detail = "barrier '" + barrier.name + "': gradient error " + std::to_string(report.worst_gradient_error) +
                    ", hessian error " + std::to_string(report.worst_hessian_error) + ", asymmetry " +
                    std::to_string(report.worst_asymmetry);
  }
  return report;
}

}  // namespace riskgate
