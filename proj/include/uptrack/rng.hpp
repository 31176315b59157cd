#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace uptrack {

inline constexpr double kPi = 3.1415926535897932384626433832795;
inline constexpr double kTwoPi = 2.0 * kPi;

// splitmix64. All seeded behaviour in the library goes through this
// generator so that identical seeds give bit-identical results across
// platforms and standard libraries.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller; consumes exactly two uniforms per draw so
  // the stream position stays a pure function of the draw count
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

// Folds extra identifiers into a seed so independent consumers (per frame,
// per epoch, per sequence, ...) get decorrelated deterministic streams.
inline std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                               std::uint64_t c = 0) {
  SplitMix64 m(seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL) ^
               (c * 0x165667b19e3779f9ULL));
  return m.next();
}

// Fisher-Yates with a splitmix stream; unlike std::shuffle the result is
// pinned for a given seed on every toolchain.
template <typename T>
void seeded_shuffle(std::vector<T>& values, std::uint64_t seed) {
  SplitMix64 gen(seed);
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace uptrack
