#pragma once

#include <cstdint>

namespace fcntag {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Independent seed for a named stream (init, shuffle, dropout, clip index...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

enum class Stream : std::uint64_t { init = 1, shuffle = 2, dropout = 3, synth = 4, split = 5 };

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s) { return derive_seed(seed, static_cast<std::uint64_t>(s)); }

}  // namespace fcntag
