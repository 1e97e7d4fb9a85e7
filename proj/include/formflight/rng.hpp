#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace formflight {

// splitmix64 finalizer. Used to derive independent substream seeds from
// (seed, stream id, ...) tuples so per-sequence / per-rollout work can run in
// any order and still reproduce bit-identically.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x9E3779B97F4A7C15ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  return std::mt19937_64(mix_seed(seed, a, b, c));
}

// Uniform / gaussian draws built directly on the raw 64-bit stream. The std::
// distributions are implementation-defined, and output artifacts must not
// change when the standard library does.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform_in(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller, cosine branch only: two uniforms per draw, no hidden cache state.
inline double gaussian(std::mt19937_64& g) {
  const double u1 = 1.0 - uniform01(g);  // (0, 1], keeps log finite
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline int uniform_index(std::mt19937_64& g, int count) {
  int k = static_cast<int>(uniform01(g) * count);
  return k >= count ? count - 1 : k;
}

// Fisher-Yates on top of uniform01 (std::shuffle is implementation-defined).
template <typename T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& g) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(g, static_cast<int>(i)));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace formflight
