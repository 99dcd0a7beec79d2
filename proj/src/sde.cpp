#include "riskgate/sde.hpp"

#include <cmath>
#include <string>

namespace riskgate {

namespace {

std::string shape(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

ModelEval evaluate(const SdeModel& model, const Vector& x) {
  if (x.size() != model.n) {
    throw ContractViolation("state has length " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(model.n));
  }
  ModelEval eval{model.drift(x), model.control_matrix(x), model.diffusion(x)};
  if (eval.drift.size() != model.n) {
    throw ContractViolation("drift has length " + std::to_string(eval.drift.size()) + ", expected " +
                            std::to_string(model.n));
  }
  if (eval.control_matrix.rows() != model.n || eval.control_matrix.cols() != model.m) {
    throw ContractViolation("control matrix is " + shape(eval.control_matrix.rows(), eval.control_matrix.cols()) +
                            ", expected " + shape(model.n, model.m));
  }
  if (eval.diffusion.rows() != model.n || eval.diffusion.cols() != model.q) {
    throw ContractViolation("diffusion is " + shape(eval.diffusion.rows(), eval.diffusion.cols()) +
                            ", expected " + shape(model.n, model.q));
  }
  return eval;
}

Vector euler_maruyama_step(const ModelEval& eval, const Vector& x, const Vector& u, double dt,
                           const Vector& xi) {
  if (!(dt > 0.0)) throw ContractViolation("euler_maruyama_step: dt must be > 0");
  if (u.size() != eval.control_matrix.cols()) throw ContractViolation("control has wrong length");
  if (xi.size() != eval.diffusion.cols()) throw ContractViolation("noise draw has wrong length");
  if (!eval.drift.allFinite() || !eval.control_matrix.allFinite() || !eval.diffusion.allFinite()) {
    throw IntegrationFault("model evaluation is not finite", x);
  }
  Vector next = x + (eval.drift + eval.control_matrix * u) * dt + eval.diffusion * (std::sqrt(dt) * xi);
  if (!next.allFinite()) throw IntegrationFault("integrated state is not finite", x);
  return next;
}

Vector euler_maruyama_step(const SdeModel& model, const Vector& x, const Vector& u, double dt,
                           const Vector& xi) {
  return euler_maruyama_step(evaluate(model, x), x, u, dt, xi);
}

}  // namespace riskgate
