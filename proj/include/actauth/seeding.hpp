#pragma once

#include <cstdint>

namespace actauth {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream seed; a pure function of (global seed, stream id).
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t stream) {
  return splitmix64(splitmix64(global_seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

}  // namespace actauth
