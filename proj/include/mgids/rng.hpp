#pragma once

#include <cstdint>

namespace mgids {

// Counter-based hashing so every random draw is addressable by (seed, index...)
// and independent of call order.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return splitmix64(seed ^ splitmix64(v));
}

template <typename... Rest>
constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v, Rest... rest) {
  return hash_combine(hash_combine(seed, v), static_cast<std::uint64_t>(rest)...);
}

/// Uniform double in [0, 1) from the top 53 bits of a hash.
constexpr double unit_double(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace mgids
