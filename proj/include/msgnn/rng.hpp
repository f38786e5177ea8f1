#pragma once

#include <cstdint>

namespace msgnn {

// SplitMix64 (Steele/Lea/Flood; the reference implementation shipped with
// xoshiro). State advances by the golden-ratio gamma, output is the finalizer
// below. Every stream of randomness in this project is one of these, seeded
// from a documented 64-bit value, so datasets and runs can be reproduced from
// the numbers written into manifests and logs.
inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix_fin(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kSplitMixGamma;
    return splitmix_fin(state_);
  }

  // Uniform in [0,1) with full float mantissa (top 24 bits).
  float next_float01() {
    return static_cast<float>(next() >> 40) * (1.0f / 16777216.0f);
  }

  // Uniform in [0,1) with 53 bits.
  double next_double01() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Uniform in [0,bound) via 128-bit multiply-high; bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  bool next_coin() { return (next() & 1ULL) != 0ULL; }

 private:
  std::uint64_t state_;
};

// Derived stream seed: the (index+1)-th output of a SplitMix64 stream seeded
// with `seed`. Closed form, so any implementation can reproduce it:
//   mix_seed(seed, i) = fin(seed + (i+1) * 0x9E3779B97F4A7C15)
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix_fin(seed + (index + 1) * kSplitMixGamma);
}

}  // namespace msgnn
