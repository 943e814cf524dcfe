#pragma once

#include <cstdint>

namespace reflray {

// Counter-based generator (splitmix64 core). Streams derived from
// (seed, stream, index) tuples are independent of evaluation order,
// which keeps multi-threaded sampling deterministic.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  static Rng from_stream(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t index) {
    std::uint64_t h = seed;
    h = mix(h ^ (0x9e3779b97f4a7c15ULL + stream));
    h = mix(h ^ (0xbf58476d1ce4e5b9ULL + index));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace reflray
