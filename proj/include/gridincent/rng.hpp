#pragma once

#include <cstdint>
#include <random>

namespace gridincent {

// Seedable generator used everywhere randomness appears. The real-valued
// transforms are hand-rolled from the raw 64-bit stream so that traces are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static constexpr const char* name() { return "mt19937_64"; }

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53-bit resolution
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // symmetric unit interval, used for perturbation directions
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

  // inclusive range
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gridincent
