#pragma once

// Draws built directly on mt19937_64 output. The standard distributions are
// implementation-defined, which would make corpora differ across toolchains.

#include <cstdint>
#include <random>
#include <vector>

namespace desm {

using Rng = std::mt19937_64;

inline uint64_t uniform_index(Rng& rng, uint64_t n) { return rng() % n; }

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

/// Independent stream for item `k` of a run seeded with `seed`.
inline uint64_t derive_seed(uint64_t seed, uint64_t k) {
  // splitmix64 finalizer
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace desm
