#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "riskgate/rng.hpp"

using namespace riskgate;

// Known-answer vectors published with Random123 (kat_vectors, philox4x32 10 rounds).
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

// First two outputs of SplitMix64 seeded with 0.
TEST(Mix64, SplitMixReference) {
  EXPECT_EQ(mix64(0), 0xe220a8397b1dcdafull);
  EXPECT_EQ(mix64(0x9e3779b97f4a7c15ull), 0x6e789e6aa1b965f4ull);
}

TEST(DeriveSeed, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
}

TEST(NormalDraw, PureFunctionOfKey) {
  EXPECT_EQ(normal_draw(1, 2, 3), normal_draw(1, 2, 3));
  EXPECT_NE(normal_draw(1, 2, 3), normal_draw(1, 2, 2));
  EXPECT_NE(normal_draw(1, 2, 3), normal_draw(1, 3, 3));
}

TEST(NormalDraw, Moments) {
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = normal_draw(99, static_cast<std::uint64_t>(k / 2), static_cast<std::uint64_t>(k % 2));
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(UniformDraw, RangeAndMean) {
  double s = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double u = uniform_draw(5, 1, k);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
  }
  EXPECT_NEAR(s / 100000.0, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000.0));
}

TEST(UniformDraw, DisjointFromNormals) {
  // same numeric key, different counter space
  const double n = normal_draw(7, 0, 0);
  const double u = uniform_draw(7, 0, 0);
  EXPECT_NE(std::erf(n), u);
  EXPECT_NE(uniform_draw(7, 0, 0), uniform_draw(7, 1, 0));
}
