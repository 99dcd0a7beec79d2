#pragma once

#include <string>
#include <vector>

namespace riskgate {

// Error function and its inverses.
//
// erf/erfc come from the C library. erf_inv and erfc_inv start from Giles'
// single-precision rational approximation and are polished by Halley steps
// on erf (central region) or on log(erfc) (tails), so deep-tail budgets such
// as rho_d = 1e-6 keep full relative accuracy.
double erf(double x);
double erfc(double x);
double erf_inv(double p);   // |p| < 1, otherwise DomainError
double erfc_inv(double q);  // 0 < q < 2, otherwise DomainError

struct BoundResult {
  double value = 0.0;
  double raw = 0.0;     // value before clamping to [0, 1]
  std::string branch;   // which closed form produced the value
  bool clamped = false;
};

// Finite-time exit bound of a stochastic CBF with generator condition
// Gamma_B <= -alpha B + beta (martingale bound):
//   alpha > 0, alpha >= beta : 1 - (1 - gamma) e^{-beta T}
//   alpha > 0, alpha <  beta : (gamma + (e^{beta T} - 1) beta / alpha) e^{-beta T}
//   alpha = 0               : gamma + beta T
BoundResult scbf_risk_bound(double alpha, double beta, double gamma, double horizon);

struct RiskParams {
  double gamma = 0.0;
  double eta = 0.0;
  double horizon = 1.0;
  double rho_d = 1.0;
};

// Smallest admissible risk budget 1 - erf(gap / (sqrt(2) eta T)).
// `gap` is 1 - gamma for a single level, or mu_i - mu_{i-1} inside a cascade.
double racbf_min_risk_for_gap(double gap, double eta, double horizon);
double racbf_min_risk(double gamma, double eta, double horizon);

// Remaining risk budget h(I_L) = gap - sqrt(2) eta T erf^{-1}(1 - rho_d) - I_L.
// Throws AdmissibilityError when rho_d is below racbf_min_risk_for_gap.
double racbf_h(double integral, const RiskParams& params, double gap);
double racbf_h(double integral, const RiskParams& params);

// Budget term sqrt(2) eta T erf^{-1}(1 - rho_d) after the admissibility check.
double racbf_budget_offset(double gap, double eta, double horizon, double rho_d);

struct EtaThreshold {
  double value = 0.0;
  // gamma == 0: the minimum RA-CBF risk is positive for every eta > 0 while
  // the S-CBF floor is gamma = 0, so no noise level makes the RA-CBF bound
  // strictly tighter.
  bool never_tighter = false;
};

// Noise level below which the smallest RA-CBF budget undercuts every S-CBF
// bound: eta < (1 - gamma) / (sqrt(2) T erf^{-1}(1 - gamma)).
EtaThreshold eta_threshold(double gamma, double horizon);

struct CascadeSpec {
  std::vector<double> levels;  // mu_0 = gamma < mu_1 < ... < mu_k = 1
  std::vector<double> etas;    // one per level above mu_0
  std::vector<double> rho_d;   // optional; one per level above mu_0
  double horizon = 1.0;

  int level_count() const { return static_cast<int>(levels.size()) - 1; }
  double gap(int level) const { return levels.at(level) - levels.at(level - 1); }

  // Throws ContractViolation for malformed levels and AdmissibilityError for
  // budgets below their level minimum.
  void validate() const;
};

struct CascadeBound {
  std::vector<double> per_level;
  double product = 1.0;
};

CascadeBound cascaded_risk_bound(const CascadeSpec& spec);

// P(sup_{0<=t<=T} w(t) < a) for a standard Wiener process.
double wiener_sup_law(double level, double horizon);

}  // namespace riskgate
