#pragma once

#include <array>
#include <cstdint>

namespace riskgate {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Stateless: the output is a pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

// 64-bit finalizer from SplitMix64.
std::uint64_t mix64(std::uint64_t x);

// Seed of trial `index` in a batch with base seed `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Standard normal draw keyed by (seed, step, channel). Channels are paired
// through one Box-Muller transform, so channel 2k and 2k+1 share a counter.
double normal_draw(std::uint64_t seed, std::uint64_t step, std::uint64_t channel);

// Uniform draw in [0, 1) keyed the same way; used for initial-condition
// sampling, on a counter space disjoint from normal_draw.
double uniform_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace riskgate
