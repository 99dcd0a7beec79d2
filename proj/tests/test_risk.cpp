#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "riskgate/risk.hpp"
#include "riskgate/types.hpp"

using namespace riskgate;

// Oracle values below were computed once with 30-digit mpmath and frozen.

TEST(Erf, Values) {
  EXPECT_EQ(riskgate::erf(0.0), 0.0);
  EXPECT_NEAR(riskgate::erf(1.0 / std::sqrt(2.0)), 0.682689492137085897, 1e-15);
  EXPECT_NEAR(erf_inv(0.5), 0.476936276204469873, 1e-14);
  EXPECT_NEAR(erf_inv(0.99), 1.82138636771844967, 1e-13);
  EXPECT_NEAR(erf_inv(0.9), 1.16308715367667409, 1e-13);
  EXPECT_NEAR(erf_inv(-0.3), -0.272462714726754356, 1e-14);
  EXPECT_NEAR(erf_inv(1.0 - 1e-6), 3.45891073727950002, 1e-10);
}

TEST(Erf, InverseDomain) {
  EXPECT_THROW(erf_inv(1.0), DomainError);
  EXPECT_THROW(erf_inv(-1.0), DomainError);
  EXPECT_THROW(erf_inv(std::nan("")), DomainError);
  EXPECT_THROW(erfc_inv(0.0), DomainError);
  EXPECT_THROW(erfc_inv(2.0), DomainError);
}

TEST(Erf, RoundTripProperty) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> p(-1.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const double v = p(gen);
    ASSERT_NEAR(riskgate::erf(erf_inv(v)), v, 1e-14) << v;
  }
  for (double q : {1e-9, 1e-12, 1e-15, 1e-100, 1e-300}) {
    const double x = erfc_inv(q);
    EXPECT_NEAR(riskgate::erfc(x) / q, 1.0, 1e-12) << q;
  }
}

TEST(Erf, InverseIsOddAndMonotone) {
  double prev = -INFINITY;
  for (int i = -999; i <= 999; ++i) {
    const double p = i / 1000.0;
    const double x = erf_inv(p);
    EXPECT_DOUBLE_EQ(x, -erf_inv(-p));
    EXPECT_GT(x, prev);
    prev = x;
  }
}

TEST(ScbfBound, ReferenceRows) {
  EXPECT_NEAR(scbf_risk_bound(0.1, 0.01, 0.5, 1.0).value, 0.504975083125415973, 1e-14);
  EXPECT_NEAR(scbf_risk_bound(10.0, 4.0, 0.5, 1.0).value, 0.990842180555632910, 1e-14);
  EXPECT_NEAR(scbf_risk_bound(2.0, 3.0, 0.1, 0.2).value, 0.731663709468362994, 1e-14);
  EXPECT_NEAR(scbf_risk_bound(0.0, 0.05, 0.3, 2.0).value, 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(scbf_risk_bound(0.0, 0.0, 0.37, 5.0).value, 0.37);
}

TEST(ScbfBound, ClampsAboveOne) {
  const BoundResult r = scbf_risk_bound(1.0, 2.0, 0.3, 1.0);
  EXPECT_TRUE(r.clamped);
  EXPECT_NEAR(r.raw, 1.76993001849775842, 1e-13);
  EXPECT_EQ(r.value, 1.0);
}

TEST(ScbfBound, MonotoneInGammaAndHorizon) {
  for (double g = 0.0; g < 0.95; g += 0.1) {
    EXPECT_LE(scbf_risk_bound(0.5, 0.1, g, 1.0).value, scbf_risk_bound(0.5, 0.1, g + 0.05, 1.0).value);
    EXPECT_LE(scbf_risk_bound(0.5, 0.1, g, 1.0).value, scbf_risk_bound(0.5, 0.1, g, 2.0).value);
  }
}

TEST(RacbfMinRisk, Values) {
  EXPECT_LT(racbf_min_risk(0.5, 0.006, 1.0), 1e-300);
  EXPECT_NEAR(racbf_min_risk(0.9, 0.1, 1.0), 0.317310507862914103, 1e-14);
  EXPECT_EQ(racbf_min_risk(0.5, 0.0, 1.0), 0.0);
  EXPECT_THROW(racbf_h(0.0, {0.5, 0.006, 1.0, 0.0}), AdmissibilityError);
  EXPECT_NEAR(racbf_h(0.0, {0.5, 0.0, 1.0, 0.0}), 0.5, 1e-15);
  EXPECT_NEAR(racbf_min_risk(1.0 - 1e-15, 0.1, 1.0), 1.0, 1e-12);
}

TEST(RacbfH, Values) {
  EXPECT_NEAR(racbf_h(0.0, {0.5, 0.006, 1.0, 0.01}), 0.484545024178706595, 1e-13);
  EXPECT_NEAR(racbf_h(0.0, {0.0, 0.025, 4.0, 0.1}, 0.2), 0.0355146373048527285, 1e-13);
  EXPECT_NEAR(racbf_h(0.1, {0.5, 0.006, 1.0, 0.01}), 0.384545024178706595, 1e-13);
  EXPECT_THROW(racbf_h(0.0, {0.9, 0.1, 1.0, 0.3}), AdmissibilityError);
}

TEST(RacbfH, ZeroAtAdmissibleBoundary) {
  const double rho = racbf_min_risk(0.6, 0.1, 1.0);
  EXPECT_NEAR(racbf_h(0.0, {0.6, 0.1, 1.0, rho}), 0.0, 1e-12);
}

TEST(RacbfH, DecreasesWithTighterBudget) {
  double prev = -INFINITY;
  for (double rho : {0.001, 0.01, 0.1, 0.3, 0.5, 0.9}) {
    const double h = racbf_h(0.0, {0.5, 0.01, 1.0, rho});
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(EtaThreshold, Values) {
  EXPECT_NEAR(eta_threshold(0.5, 1.0).value, 0.741301109252800930, 1e-13);
  EXPECT_NEAR(eta_threshold(0.5, 2.0).value, 0.370650554626400465, 1e-13);
  // vanishing margin: erf^{-1}(m) ~ sqrt(pi) m / 2, so the threshold tends to sqrt(2/pi) / T
  EXPECT_NEAR(eta_threshold(1.0 - 1e-12, 1.0).value, 0.797884560802865356, 1e-9);
  EXPECT_TRUE(eta_threshold(0.0, 1.0).never_tighter);
  EXPECT_THROW(eta_threshold(1.0, 1.0), DomainError);
}

TEST(EtaThreshold, SeparatesTheTwoBounds) {
  // below the threshold the smallest RA-CBF budget undercuts gamma, above it does not
  const double g = 0.3, T = 1.5;
  const double eta = eta_threshold(g, T).value;
  EXPECT_LT(racbf_min_risk(g, 0.99 * eta, T), g);
  EXPECT_GT(racbf_min_risk(g, 1.01 * eta, T), g);
}

TEST(Cascade, ReferenceRows) {
  const std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const CascadeBound road = cascaded_risk_bound({levels, {0.012, 0.025, 0.035, 0.046, 0.067}, {}, 4.0});
  const double road_ref[] = {3.090859376459204e-05, 0.045500263896358424, 0.15312745101966957, 0.2770560250326203,
                             0.455505141268065};
  const CascadeBound coll = cascaded_risk_bound({levels, {0.018, 0.031, 0.049, 0.063, 0.076}, {}, 4.0});
  const double coll_ref[] = {0.005473203572488285, 0.10676553426808176, 0.3075349239372042, 0.4273987536215907,
                             0.510605772861378};
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(road.per_level[i], road_ref[i], 1e-12);
    EXPECT_NEAR(coll.per_level[i], coll_ref[i], 1e-12);
  }
  double prod = 1.0;
  for (double r : road.per_level) prod *= r;
  EXPECT_NEAR(road.product, prod, 1e-18);
}

TEST(Cascade, DegeneratesToSingleLevel) {
  const CascadeBound c = cascaded_risk_bound({{0.4, 1.0}, {0.2}, {}, 2.0});
  ASSERT_EQ(c.per_level.size(), 1u);
  EXPECT_DOUBLE_EQ(c.per_level[0], racbf_min_risk(0.4, 0.2, 2.0));
}

TEST(Cascade, RejectsMalformedSpecs) {
  EXPECT_THROW(CascadeSpec({{0.2, 0.1, 1.0}, {0.1, 0.1}, {}, 1.0}).validate(), ContractViolation);
  EXPECT_THROW(CascadeSpec({{0.2, 0.5, 0.9}, {0.1, 0.1}, {}, 1.0}).validate(), ContractViolation);
  EXPECT_THROW(CascadeSpec({{0.2, 0.5, 1.0}, {0.1}, {}, 1.0}).validate(), ContractViolation);
  EXPECT_THROW(CascadeSpec({{0.0, 0.5, 1.0}, {0.1, 0.5}, {0.5, 0.01}, 1.0}).validate(), AdmissibilityError);
}

TEST(WienerSupLaw, Values) {
  EXPECT_NEAR(wiener_sup_law(1.0, 1.0), 0.682689492137085897, 1e-15);
  EXPECT_NEAR(wiener_sup_law(2.0, 3.0), 0.751786921010076417, 1e-15);
  EXPECT_NEAR(wiener_sup_law(1e6, 1.0), 1.0, 1e-15);
}
