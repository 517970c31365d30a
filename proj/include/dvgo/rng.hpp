#pragma once

#include <cstdint>
#include <random>

namespace dvgo {

/// Deterministic RNG wrapper. All draws go through the two helpers below so
/// the stream is identical across platforms for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n).
  std::uint64_t index(std::uint64_t n) { return eng_() % n; }

  /// Derives an independent child stream (for per-image / per-run seeding).
  Rng fork() { return Rng(eng_()); }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dvgo
