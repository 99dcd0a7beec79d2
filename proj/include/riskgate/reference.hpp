#pragma once

#include <array>

// Published reference values the reproduction commands compare against.
namespace riskgate::reference {

// S-CBF theoretical risk for (alpha, beta) = (0.1, 0.01) and (10, 4), gamma 0.5, T 1.
inline constexpr std::array<double, 2> kScbfTheoretical{0.505, 0.990};
inline constexpr std::array<std::array<double, 2>, 2> kScbfGains{{{0.1, 0.01}, {10.0, 4.0}}};

// RA-CBF robot study: risk budgets and measured risks at gamma 0.5, eta 0.006.
inline constexpr std::array<double, 2> kRacbfBudgets{0.01, 0.505};
inline constexpr std::array<double, 2> kRacbfMeasured{1e-4, 0.458};
inline constexpr double kRobotEta = 0.006;

// Empirical per-level eta (road, collision) for the merge study.
inline constexpr std::array<double, 5> kRoadEta{0.012, 0.025, 0.035, 0.046, 0.067};
inline constexpr std::array<double, 5> kCollisionEta{0.018, 0.031, 0.049, 0.063, 0.076};

// Minimum per-level risks at T = 4 for levels 2..5 (level 1 depends on gamma).
inline constexpr std::array<double, 4> kRoadMinRisk{0.046, 0.153, 0.277, 0.456};
inline constexpr std::array<double, 4> kCollisionMinRisk{0.107, 0.308, 0.427, 0.511};
inline constexpr std::array<double, 2> kLevelOneMinRisk{8.58e-4, 0.026};

// Per-level budgets of the merge study.
inline constexpr std::array<double, 5> kRoadBudget{0.001, 0.1, 0.25, 0.5, 0.6};
inline constexpr std::array<double, 5> kCollisionBudget{0.05, 0.15, 0.4, 0.5, 0.6};

}  // namespace riskgate::reference
