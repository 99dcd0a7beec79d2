#pragma once

#include <functional>
#include <string>
#include <vector>

#include "riskgate/sde.hpp"

namespace riskgate {

// Scalar barrier B with safe set S = {x : 0 <= B(x) < 1}.
//
// A barrier may read only a subset of the state (`support`, empty means all
// of it); gradient and Hessian are then expressed in support coordinates,
// which keeps the trace term cheap for barriers embedded in large joint
// states.
struct BarrierSpec {
  std::string name;
  std::vector<int> support;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  double gamma = 0.0;
  // mu_0 = gamma < mu_1 < ... < mu_k = 1. Empty means the single level {gamma, 1}.
  std::vector<double> levels;

  int support_size(int n) const { return support.empty() ? n : static_cast<int>(support.size()); }
  std::vector<double> resolved_levels() const;
};

struct GeneratorSplit {
  double drift_part = 0.0;  // grad B . f + 1/2 Tr(sigma^T hess B sigma)
  RowVector control_row;    // grad B . g
};

// Gamma_B(x, u) = grad B . (f + g u) + 1/2 Tr(sigma^T hess B sigma).
double generator(const SdeModel& model, const BarrierSpec& barrier, const Vector& x, const Vector& u);

GeneratorSplit generator_decomposition(const SdeModel& model, const BarrierSpec& barrier, const Vector& x);
GeneratorSplit generator_decomposition(const ModelEval& eval, const BarrierSpec& barrier, const Vector& x);

// L_sigma B(x) = grad B . sigma(x), a row of length q.
RowVector sigma_lie(const SdeModel& model, const BarrierSpec& barrier, const Vector& x);
RowVector sigma_lie(const ModelEval& eval, const BarrierSpec& barrier, const Vector& x);

// Gradient scattered back to full state coordinates.
Vector full_gradient(const BarrierSpec& barrier, const Vector& x);

struct DerivativeCheck {
  bool ok = true;
  double worst_gradient_error = 0.0;  // mixed abs/rel error against central differences
  double worst_hessian_error = 0.0;
  double worst_asymmetry = 0.0;
  std::string detail;
};

// Compares the analytic gradient and Hessian with central finite differences
// (five-point stencil) at every sample point (mixed tolerance `tol`, symmetry
// to 1e-12 relative).
DerivativeCheck check_derivatives(const BarrierSpec& barrier, const std::vector<Vector>& samples,
                                  double tol = 1e-6);

}  // namespace riskgate
