#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace copt {

// Seeded random source used everywhere randomness is needed. Gaussian draws
// go through an explicit Box-Muller transform instead of
// std::normal_distribution, whose algorithm is implementation-defined; with
// mt19937_64 (fully specified by the standard) the stream for a given seed
// is the same on every platform.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal. Box-Muller, one spare cached per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0); the smallest nonzero uniform() is 2^-53.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64, and
    // reproducibility matters more than the (immeasurable) modulo bias.
    return engine_() % n;
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace copt
