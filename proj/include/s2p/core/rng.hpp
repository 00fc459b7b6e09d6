#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace s2p {

/// PCG32. Self-contained so that seeded streams are identical across
/// platforms and stdlib versions, and so trainer checkpoints can carry the
/// exact stream state (two u64 words).
struct Rng {
  uint64_t state = 0x853c49e6748fea9bULL;
  uint64_t inc = 0xda3e39cb94b95bdbULL;

  Rng() = default;
  explicit Rng(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(uint64_t seed, uint64_t stream = 0) {
    state = 0;
    inc = (stream << 1u) | 1u;
    next_u32();
    state += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state;
    state = old * 6364136223846793005ULL + inc;
    uint32_t xorshifted = (uint32_t)(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = (uint32_t)(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() { return ((uint64_t)next_u32() << 32) | next_u32(); }

  /// Uniform in [0,1); granularity 2^-32.
  double uniform01() { return next_u32() * 0x1p-32; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) { return (int64_t)(uniform01() * (double)n) % n; }

  /// Standard normal via Box-Muller (cosine branch only; keeps the state
  /// serializable as plain words with no cached spare).
  double normal() {
    double u1 = (next_u32() + 0.5) * 0x1p-32;  // (0,1)
    double u2 = next_u32() * 0x1p-32;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }
};

}  // namespace s2p
