#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace laenet {

// Counter-based deterministic RNG. Unlike the std:: distributions, every
// draw here is fully specified arithmetic, so (seed, stream, draw-index)
// gives the same value on any platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_id)
      : state_(mix(seed ^ fnv1a(stream_id))) {}

  explicit RngStream(std::uint64_t seed) : RngStream(seed, "") {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Exponential with mean 1.
  double exponential() { return -std::log1p(-uniform01()); }

  // Standard normal via Box-Muller (no caching, so the draw index stays
  // in lockstep with the call count).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return h;
  }

  std::uint64_t state_;
};

}  // namespace laenet
