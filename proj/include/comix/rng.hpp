#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace comix {

// splitmix64; used to derive independent seed streams from one root seed.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named substream of a root seed: rng for "env", "explore", "init", ...
// Distinct names give statistically independent generators and keep every
// component's randomness reproducible from the single run seed.
inline std::mt19937_64 make_rng(uint64_t root_seed, std::string_view stream) {
  return std::mt19937_64(mix_seed(root_seed ^ fnv1a(stream)));
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

}  // namespace comix
