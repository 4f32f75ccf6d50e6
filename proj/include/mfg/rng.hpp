#pragma once

/// @file
/// Deterministic 64-bit generator for reproducible populations. SplitMix64:
/// the state advances by the golden-ratio constant and each output is the
/// finalizer of the new state, so draw i depends only on (seed, i). Uniform
/// doubles take the top 53 bits: u = (x >> 11) * 2^-53, uniform on [0, 1).

#include <cstdint>

namespace mfg {

class CounterRng
{
public:
  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64()
  {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

private:
  std::uint64_t state_;
};

}  // namespace mfg
