#pragma once

#include <cstdint>
#include <random>

namespace tiersim::detail {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so uniforms are derived from the raw 64-bit output to keep seeded output
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tiersim::detail
