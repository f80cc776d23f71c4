#pragma once

// Deterministic random numbers with a pinned layout: mt19937_64 raw draws,
// uniforms via the top 53 bits, and hand-rolled Box-Muller normals so that
// streams are reproducible across standard libraries (std::normal_distribution
// is implementation-defined and must not be used anywhere results are pinned).

#include <cmath>
#include <cstdint>
#include <random>

namespace lowrank {

class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform on [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double twopi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(twopi * u2);
    have_spare_ = true;
    return r * std::cos(twopi * u2);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lowrank
