#pragma once

#include <cstdint>
#include <random>

namespace tensorbeat::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent generator for a named purpose under one user seed.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ splitmix64(purpose)) + index));
}

// Stream tags.
inline constexpr std::uint64_t kMixingStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;
inline constexpr std::uint64_t kRawPhaseStream = 3;
inline constexpr std::uint64_t kAlsInitStream = 4;
inline constexpr std::uint64_t kSceneDrawStream = 5;

}  // namespace tensorbeat::detail
