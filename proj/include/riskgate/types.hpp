#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace riskgate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Dimension or shape mismatch between collaborating objects.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A numeric argument outside the function's domain (e.g. erf_inv(1)).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent configuration; detected before any simulation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A risk budget below the admissible minimum for its level.
class AdmissibilityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Non-finite value produced while integrating the SDE.
class IntegrationFault : public std::runtime_error {
 public:
  IntegrationFault(const std::string& what, Vector state)
      : std::runtime_error(what), state_(std::move(state)) {}

  const Vector& state() const { return state_; }

 private:
  Vector state_;
};

}  // namespace riskgate
