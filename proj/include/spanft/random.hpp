#pragma once

#include <cstdint>
#include <string_view>

namespace spanft {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// The splitmix64 generator. Every seeded decision in the library (random
// segmentation, parameter init, shuffling) draws from this so that outputs
// are identical across platforms and standard libraries.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform integer in [0, bound), bound >= 1. Rejection sampling removes
  // modulo bias.
  constexpr std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi) {
    return lo + (hi - lo) * unit();
  }

  constexpr std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Hash of a byte string keyed by seed, built from splitmix64 steps.
constexpr std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = mix64(seed + SplitMix64::kGamma);
  for (unsigned char c : bytes) {
    h = mix64(h ^ (static_cast<std::uint64_t>(c) + SplitMix64::kGamma));
  }
  return mix64(h ^ static_cast<std::uint64_t>(bytes.size()));
}

}  // namespace spanft
