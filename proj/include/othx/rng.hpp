#pragma once

#include <cmath>
#include <cstdint>

namespace othx {

// SplitMix64 (Steele, Lea, Flood 2014). The project-wide generator: a fixed
// 64-bit integer recurrence, so streams are reproducible across machines and
// compilers. Dataset generation uses only the integer path.
struct SplitMix64 {
  uint64_t state = 0;

  SplitMix64() = default;
  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n) via rejection (integer-only, portable).
  uint64_t below(uint64_t n) {
    // Largest multiple of n that fits in 64 bits; reject above it.
    const uint64_t limit = n * ((~0ull) / n);
    uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no cached spare; two draws per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

}  // namespace othx
