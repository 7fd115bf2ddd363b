#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace transopt {

/// Seeded random source with fully specified output.
///
/// The engine is std::mt19937_64; the distributions are written out here
/// (std:: distributions are implementation-defined) so a given seed yields
/// the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n), rejection sampled.
  std::uint64_t index(std::uint64_t n);

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace transopt
