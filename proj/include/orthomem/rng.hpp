#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace orthomem {

/// Seeded source of uniforms and standard normals.
///
/// Engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The std:: distributions are not, so uniforms take the top 53
/// bits and normals use the cosine branch of Box-Muller. Streams are
/// therefore identical on every conforming toolchain with the same libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace orthomem
