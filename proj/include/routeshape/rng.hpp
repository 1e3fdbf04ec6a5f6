#pragma once

#include <cstdint>
#include <random>

namespace routeshape {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed from a parent seed and a stream tag.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

// Bit-exact across standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return uniform01(rng()); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return k < n ? k : n - 1;
}

}  // namespace routeshape
