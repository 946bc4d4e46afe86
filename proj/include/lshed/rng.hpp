#pragma once

#include <cstdint>
#include <string_view>

namespace lshed::rng {

// Every random draw in the simulator comes from one of two sources, both
// fully specified here so that ports in other languages reproduce traces:
//
//   * Xoshiro256** (Blackman & Vigna), seeded by four SplitMix64 outputs.
//     Used for sequential draws (scenario generation, spanning trees).
//   * mix64 counter hashing, for draws that must be a pure function of
//     (stream, t, index) such as per-round noise and per-round edges.
//
// A named stream's key is mix64(seed ^ fnv1a64(name)).

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view name) {
  return mix64(seed ^ fnv1a64(name));
}

/// Counter-based draw: a pure function of (key, a, b).
constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(key ^ mix64(a)) + b);
}

/// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform in [0, 1).
  double uniform() { return to_unit(next()); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t s_[4];
};

}  // namespace lshed::rng
