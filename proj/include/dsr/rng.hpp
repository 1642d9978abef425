#pragma once

#include <cstdint>
#include <string_view>

// Deterministic random primitives. Everything here is fully specified so that
// results are identical across platforms and runs; none of the simulation code
// may use std::hash or the standard <random> distributions.

namespace dsr {

inline constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

/// splitmix64 finalizer (Steele, Lea, Vigna).
inline std::uint64_t splitmix64_scramble(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Combines a seed with one more 64-bit value, hash-combine style.
/// mix64(h, v) = scramble(h ^ (v + kGolden64 + (h << 6) + (h >> 2)))
inline std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  return splitmix64_scramble(h ^ (v + kGolden64 + (h << 6) + (h >> 2)));
}

/// FNV-1a over the UTF-8 bytes of a string.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// splitmix64 stream generator.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += kGolden64;
    return splitmix64_scramble(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Lemire multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace dsr
