#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace peakforge {

/// Portable random stream. All library and CLI randomness flows through this.
///
/// Engine: std::mt19937_64 (bit-exact across standard libraries).
/// uniform(): top 53 bits of one engine draw scaled by 2^-53, in [0, 1).
/// normal(): Box-Muller on two uniform() draws, the cosine branch only, so
/// every normal variate consumes exactly two engine outputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi) {
    const auto span = static_cast<double>(hi - lo + 1);
    auto offset = static_cast<long>(uniform() * span);
    if (offset > hi - lo) offset = hi - lo;
    return lo + offset;
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace peakforge
