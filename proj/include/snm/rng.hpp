#ifndef SNM_RNG_HPP
#define SNM_RNG_HPP

#include <cstdint>
#include <random>

namespace snm {

/// Engine used everywhere randomness is consumed. Every stochastic operation
/// takes an engine reference explicitly; nothing draws from hidden state.
using Engine = std::mt19937_64;

/// splitmix64 finalizer (Steele, Lea, Flood). Used to mix seeds, not as a
/// stream generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed for trial `i` from a master seed. Trials get independent,
/// reproducible streams regardless of how work is split across threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t i) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (i + 1));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

}  // namespace snm

#endif  // SNM_RNG_HPP
