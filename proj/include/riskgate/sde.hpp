#pragma once

#include <functional>

#include "riskgate/types.hpp"

namespace riskgate {

// Control-affine SDE  dx = (f(x) + g(x) u) dt + sigma(x) dw  with
// x in R^n, u in R^m and w a standard q-dimensional Wiener process.
struct SdeModel {
  int n = 0;
  int m = 0;
  int q = 0;
  std::function<Vector(const Vector&)> drift;           // n
  std::function<Matrix(const Vector&)> control_matrix;  // n x m
  std::function<Matrix(const Vector&)> diffusion;       // n x q
};

// f, g and sigma evaluated once at a state; shared by every barrier and the
// integrator within a step.
struct ModelEval {
  Vector drift;
  Matrix control_matrix;
  Matrix diffusion;
};

// Evaluates the model, throwing ContractViolation on shape mismatch.
ModelEval evaluate(const SdeModel& model, const Vector& x);

// x + (f + g u) dt + sigma sqrt(dt) xi. Throws IntegrationFault carrying the
// pre-step state when the model or the result is not finite.
Vector euler_maruyama_step(const SdeModel& model, const Vector& x, const Vector& u, double dt,
                           const Vector& xi);
Vector euler_maruyama_step(const ModelEval& eval, const Vector& x, const Vector& u, double dt,
                           const Vector& xi);

}  // namespace riskgate
