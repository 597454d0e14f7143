#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace magloc {

// Deterministic seed derivation so that independent substreams (per tree,
// per fold, per synthetic trace) never share state.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  // FNV-1a over the key, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(seed, h);
}

using rng_engine = std::mt19937_64;

inline rng_engine make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return rng_engine(derive_seed(seed, stream));
}

}  // namespace magloc
