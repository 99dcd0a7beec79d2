#include "riskgate/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riskgate/types.hpp"

namespace riskgate {

namespace {

constexpr double kTwoOverSqrtPi = 2.0 * std::numbers::inv_sqrtpi;
constexpr double kSqrtPi = 1.0 / std::numbers::inv_sqrtpi;

// Giles, "Approximating the erfinv function" (GPU Gems), single precision.
// `w` is -log((1 - x)(1 + x)); the result is erfinv(x) / x.
double giles_ratio(double w) {
  double p;
  if (w < 5.0) {
    w -= 2.5;
    p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
  } else {
    w = std::sqrt(w) - 3.0;
    p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
  }
  return p;
}

// Asymptotic series x sqrt(pi) e^{x^2} erfc(x) = sum_k (-1)^k (2k-1)!! / (2x^2)^k,
// truncated where the next term drops below 1e-17 for x >= 26.
double erfc_scaled_series(double x) {
  const double t = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 7; ++k) {
    term *= -(2.0 * k - 1.0) * t;
    sum += term;
  }
  return sum;
}

// log(erfc(x)) for x >= 0, switching to the asymptotic series once erfc
// would underflow.
double log_erfc(double x) {
  if (x < 26.0) return std::log(std::erfc(x));
  return -x * x - std::log(x * kSqrtPi) + std::log(erfc_scaled_series(x));
}

double dlog_erfc(double x) {
  if (x < 26.0) return -kTwoOverSqrtPi * std::exp(-x * x) / std::erfc(x);
  return -2.0 * x / erfc_scaled_series(x);
}

// Inverse of erfc on (0, 0.5]: Newton on log(erfc) keeps relative accuracy
// all the way into the subnormal range.
double erfc_inv_tail(double q) {
  const double log_q = std::log(q);
  double x;
  const double w = -std::log(q * (2.0 - q));
  if (w < 36.0) {
    x = giles_ratio(w) * (1.0 - q);
  } else {
    x = std::sqrt(-log_q);
    for (int i = 0; i < 4; ++i) x = std::sqrt(std::max(-log_q - std::log(x * kSqrtPi), 1e-3));
  }
  for (int i = 0; i < 30; ++i) {
    const double step = (log_erfc(x) - log_q) / dlog_erfc(x);
    x -= step;
    if (std::abs(step) <= 1e-16 * std::abs(x)) break;
  }
  return x;
}

double erf_inv_central(double p) {
  const double w = -std::log((1.0 - p) * (1.0 + p));
  double x = giles_ratio(w) * p;
  for (int i = 0; i < 3; ++i) {
    const double f = std::erf(x) - p;
    const double df = kTwoOverSqrtPi * std::exp(-x * x);
    x -= f / (df + x * f);
  }
  return x;
}

}  // namespace

double erf(double x) { return std::erf(x); }

double erfc(double x) { return std::erfc(x); }

double erf_inv(double p) {
  if (!(std::abs(p) < 1.0)) throw DomainError("erf_inv: argument must satisfy |p| < 1");
  if (p == 0.0) return 0.0;
  if (std::abs(p) <= 0.5) return erf_inv_central(p);
  const double magnitude = erfc_inv_tail(1.0 - std::abs(p));
  return p < 0.0 ? -magnitude : magnitude;
}

double erfc_inv(double q) {
  if (!(q > 0.0 && q < 2.0)) throw DomainError("erfc_inv: argument must satisfy 0 < q < 2");
  if (q > 1.0) return -erfc_inv(2.0 - q);
  if (q >= 0.5) return erf_inv_central(1.0 - q);
  return erfc_inv_tail(q);
}

BoundResult scbf_risk_bound(double alpha, double beta, double gamma, double horizon) {
  if (alpha < 0.0 || beta < 0.0) throw DomainError("scbf_risk_bound: alpha and beta must be >= 0");
  if (gamma < 0.0 || gamma > 1.0) throw DomainError("scbf_risk_bound: gamma must lie in [0, 1]");
  if (!(horizon > 0.0)) throw DomainError("scbf_risk_bound: T must be > 0");

  BoundResult out;
  if (alpha == 0.0) {
    out.branch = "alpha=0";
    out.raw = gamma + beta * horizon;
  } else if (alpha >= beta) {
    out.branch = "alpha>=beta";
    out.raw = 1.0 - (1.0 - gamma) * std::exp(-beta * horizon);
  } else {
    out.branch = "alpha<beta";
    out.raw = (gamma + std::expm1(beta * horizon) * beta / alpha) * std::exp(-beta * horizon);
  }
  out.value = std::clamp(out.raw, 0.0, 1.0);
  out.clamped = out.value != out.raw;
  return out;
}

double racbf_min_risk_for_gap(double gap, double eta, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("racbf_min_risk: T must be > 0");
  if (eta < 0.0) throw DomainError("racbf_min_risk: eta must be >= 0");
  if (gap <= 0.0) return 1.0;
  if (eta == 0.0) return 0.0;
  return std::erfc(gap / (std::numbers::sqrt2 * eta * horizon));
}

double racbf_min_risk(double gamma, double eta, double horizon) {
  if (gamma < 0.0 || gamma > 1.0) throw DomainError("racbf_min_risk: gamma must lie in [0, 1]");
  return racbf_min_risk_for_gap(1.0 - gamma, eta, horizon);
}

double racbf_budget_offset(double gap, double eta, double horizon, double rho_d) {
  if (rho_d < 0.0 || rho_d > 1.0) throw DomainError("racbf_h: rho_d must lie in [0, 1]");
  const double floor = racbf_min_risk_for_gap(gap, eta, horizon);
  if (rho_d < floor * (1.0 - 1e-12)) {
    throw AdmissibilityError("rho_d = " + std::to_string(rho_d) +
                             " is below the admissible minimum 1 - erf(gap/(sqrt(2) eta T)) = " +
                             std::to_string(floor));
  }
  if (eta == 0.0 || rho_d == 1.0) return 0.0;
  // the floor is positive for eta > 0 even when it underflows to 0 in double
  if (rho_d == 0.0) throw AdmissibilityError("rho_d = 0 is below every admissible minimum when eta > 0");
  return std::numbers::sqrt2 * eta * horizon * erfc_inv(rho_d);
}

double racbf_h(double integral, const RiskParams& params, double gap) {
  return gap - racbf_budget_offset(gap, params.eta, params.horizon, params.rho_d) - integral;
}

double racbf_h(double integral, const RiskParams& params) {
  return racbf_h(integral, params, 1.0 - params.gamma);
}

EtaThreshold eta_threshold(double gamma, double horizon) {
  if (gamma < 0.0 || gamma >= 1.0) throw DomainError("eta_threshold: gamma must lie in [0, 1)");
  if (!(horizon > 0.0)) throw DomainError("eta_threshold: T must be > 0");
  if (gamma == 0.0) return {0.0, true};
  return {(1.0 - gamma) / (std::numbers::sqrt2 * horizon * erf_inv(1.0 - gamma)), false};
}

void CascadeSpec::validate() const {
  if (levels.size() < 2) throw ContractViolation("cascade needs at least two levels (mu_0, mu_k)");
  const auto k = levels.size() - 1;
  if (etas.size() != k) throw ContractViolation("cascade needs one eta per level above mu_0");
  if (!rho_d.empty() && rho_d.size() != k) throw ContractViolation("cascade needs one rho_d per level above mu_0");
  if (!(horizon > 0.0)) throw ContractViolation("cascade horizon must be > 0");
  if (levels.front() < 0.0) throw ContractViolation("cascade levels must be >= 0");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i] > levels[i - 1])) throw ContractViolation("cascade levels must be strictly ascending");
  }
  if (std::abs(levels.back() - 1.0) > 1e-12) throw ContractViolation("cascade must end at mu_k = 1");
  for (double eta : etas) {
    if (!(eta >= 0.0)) throw ContractViolation("cascade etas must be >= 0");
  }
  for (std::size_t i = 0; i < rho_d.size(); ++i) {
    const int level = static_cast<int>(i) + 1;
    if (rho_d[i] < 0.0 || rho_d[i] > 1.0) throw ContractViolation("cascade rho_d must lie in [0, 1]");
    const double floor = racbf_min_risk_for_gap(gap(level), etas[i], horizon);
    if (rho_d[i] < floor * (1.0 - 1e-12) || (rho_d[i] == 0.0 && etas[i] > 0.0)) {
      throw AdmissibilityError("level " + std::to_string(level) + ": rho_d = " + std::to_string(rho_d[i]) +
                               " below admissible minimum " + std::to_string(floor));
    }
  }
}

CascadeBound cascaded_risk_bound(const CascadeSpec& spec) {
  CascadeSpec shape = spec;
  shape.rho_d.clear();
  shape.validate();
  CascadeBound out;
  for (int level = 1; level <= spec.level_count(); ++level) {
    const double rho = racbf_min_risk_for_gap(spec.gap(level), spec.etas[level - 1], spec.horizon);
    out.per_level.push_back(rho);
    out.product *= rho;
  }
  return out;
}

double wiener_sup_law(double level, double horizon) {
  if (!(level > 0.0) || !(horizon > 0.0)) throw DomainError("wiener_sup_law: a and T must be > 0");
  return std::erf(level / std::sqrt(2.0 * horizon));
}

}  // namespace riskgate
