#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "riskgate/mc.hpp"
#include "riskgate/rng.hpp"
#include "riskgate/scenarios.hpp"

using namespace riskgate;

namespace {

Json robot(const std::string& rule) {
  Json c = {{"scenario", "robot"}, {"name", "robot_" + rule}};
  c["mc"] = {{"N", 40}, {"seed", 5}};
  if (rule == "racbf") {
    c["barriers"] = Json::array({{{"name", "disk"}, {"type", "disk"}, {"rule", "racbf"}, {"eta", {0.006}},
                                  {"rho_d", {0.01}}, {"k_alpha", 9.0}}});
  }
  return resolve_config(c);
}

std::string configs(const std::string& file) { return std::string(RISKGATE_CONFIG_DIR) + "/" + file; }

}  // namespace

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(resolve_config({{"scenario", "robot"}, {"modle", {}}}), ConfigError);
  EXPECT_THROW(resolve_config({{"scenario", "robot"}, {"model", {{"radius", 1.0}, {"radios", 2.0}}}}), ConfigError);
  EXPECT_THROW(resolve_config({{"scenario", "boat"}}), ConfigError);
  EXPECT_THROW(resolve_config(Json::array()), ConfigError);
}

TEST(Config, WrongTypesAreRejected) {
  EXPECT_THROW(build_scenario(resolve_config({{"scenario", "robot"}, {"mc", {{"N", "many"}}}})), std::exception);
  Json bad = robot("scbf");
  bad["mc"]["dt"] = -0.1;
  EXPECT_THROW(build_scenario(bad), ConfigError);
}

TEST(Config, Overrides) {
  Json c = robot("scbf");
  apply_override(c, "barriers.0.alpha=0.7");
  EXPECT_EQ(c["barriers"][0]["alpha"], 0.7);
  apply_override(c, "mc.N=12");
  EXPECT_EQ(c["mc"]["N"], 12);
  apply_override(c, "barriers.0.name=ring");
  EXPECT_EQ(c["barriers"][0]["name"], "ring");
  EXPECT_THROW(apply_override(c, "mc.M=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "no_equals_sign"), ConfigError);
}

TEST(Config, BundledFilesLoadAndValidate) {
  for (const char* f : {"robot_scbf.cfg", "robot_racbf.cfg", "merge.cfg", "merge_rho12.cfg"}) {
    const Json c = load_config(configs(f));
    const auto s = build_scenario(c, false);
    for (const CheckResult& r : s->validate()) EXPECT_TRUE(r.ok) << f << ": " << r.check << " " << r.detail;
  }
}

TEST(Config, BudgetBelowAdmissibleMinimum) {
  Json c = load_config(configs("robot_racbf.cfg"));
  c["barriers"][0]["rho_d"] = {0.0};
  EXPECT_THROW(build_scenario(c), AdmissibilityError);
  Json m = load_config(configs("merge.cfg"));
  m["barriers"][1]["rho_d"] = {0.05, 0.15, 0.4, 0.5, 0.5};  // 0.5 < 0.5106 at the top collision level
  EXPECT_THROW(build_scenario(m), AdmissibilityError);
}

TEST(Robot, ScenarioShape) {
  const auto s = build_scenario(robot("scbf"));
  auto t = s->instantiate(123);
  EXPECT_EQ(t->model.n, 2);
  ASSERT_EQ(t->barriers.size(), 1u);
  EXPECT_NEAR(t->barriers[0].value(t->x0), 0.5, 1e-15);
  EXPECT_EQ(s->predicted().formula, "scbf");
  EXPECT_NEAR(s->predicted().value, 0.504975083125415973, 1e-14);
}

TEST(Robot, ScbfTrialStaysSafe) {
  const auto s = build_scenario(robot("scbf"));
  auto t = s->instantiate(7);
  const auto r = simulate_trial(t->model, *t->controller, t->barriers, t->x0, s->trial_config(7));
  EXPECT_FALSE(r.stopped);
  EXPECT_EQ(s->classify(r, *t), "safe");
}

TEST(Merge, InitialPlacementAndBarriers) {
  const auto s = build_scenario(load_config(configs("merge.cfg")));
  auto t = s->instantiate(derive_seed(s->base_seed(), 0));
  EXPECT_EQ(t->model.n, 55);
  EXPECT_EQ(t->model.m, 2);
  ASSERT_EQ(t->barriers.size(), 11u);
  for (const BarrierSpec& b : t->barriers) {
    EXPECT_LT(b.value(t->x0), 1.0) << b.name;
    EXPECT_GE(b.value(t->x0), 0.0) << b.name;
  }
  const auto names = s->barrier_names();
  EXPECT_EQ(names.front(), "road");
  EXPECT_EQ(names.back(), "collision_10");
}

TEST(Merge, CompositePrediction) {
  const auto s = build_scenario(load_config(configs("merge.cfg")));
  const RiskPrediction p = s->predicted();
  // road product and the collision product raised to the number of vehicles
  const double road = 0.001 * 0.1 * 0.25 * 0.5 * 0.6;
  const double coll = 0.05 * 0.15 * 0.4 * 0.5 * 0.6;
  EXPECT_NEAR(p.value, 1.0 - (1.0 - road) * std::pow(1.0 - coll, 10), 1e-12);
  EXPECT_LE(p.value, 0.01);
}

TEST(Wiener, PredictionIsReflectionLaw) {
  const auto s = build_scenario(resolve_config({{"scenario", "wiener"}}));
  EXPECT_NEAR(s->predicted().value, 1.0 - 0.682689492137085897, 1e-14);
}
