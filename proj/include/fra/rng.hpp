#pragma once

#include <cstdint>

namespace fra {

// Deterministic random streams.
//
// Everything seeded in this library goes through the two generators below so
// that results are reproducible across platforms and standard libraries
// (std::uniform_real_distribution is implementation-defined, so it is not used).
//
//   splitmix64(x):  z = x + 0x9E3779B97F4A7C15
//                   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//                   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//                   return z ^ (z >> 31)
//
//   xorshift64*:    s ^= s >> 12; s ^= s << 25; s ^= s >> 27
//                   return s * 0x2545F4914F6CDD1D
//
// A Xorshift64Star seeded with `seed` starts from state splitmix64(seed)
// (remapped to 1 if that is zero). Uniform doubles use the top 53 bits:
// u = (next() >> 11) * 2^-53, in [0, 1).

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `stream` of `master`; independent of thread count or order.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

class Xorshift64Star {
 public:
  explicit constexpr Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 1;
  }

  constexpr std::uint64_t next() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform in [0, 1).
  constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  constexpr std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace fra
