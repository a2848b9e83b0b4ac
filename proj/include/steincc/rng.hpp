#pragma once

#include <cstdint>
#include <random>

namespace steincc {

using Rng = std::mt19937_64;

// Named substreams hung off one master seed.  Keeping the labels in one
// place guarantees that independent pipeline stages (data generation, model
// init, auxiliary draws, bootstrap signs) never collide.
enum Stream : std::uint64_t {
  kStreamData = 1,
  kStreamTrain = 2,
  kStreamAux = 3,
  kStreamBootstrap = 4,
  kStreamChain = 5,
};

// SplitMix64 finalizer (Steele et al.); full-period, passes BigCrush as a
// mixer.  Good enough to decorrelate seeds that differ in a single index.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic substream seed for (master, a, b, c).  Estimators derive one
// stream per (row, coordinate) so results do not depend on thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = splitmix64(master);
  z = splitmix64(z ^ splitmix64(a + 0x1000000001ULL));
  z = splitmix64(z ^ splitmix64(b + 0x2000000002ULL));
  z = splitmix64(z ^ splitmix64(c + 0x3000000003ULL));
  return z;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Rademacher sign from the low bit of the next variate.
inline double rademacher(Rng& rng) { return (rng() & 1ULL) ? 1.0 : -1.0; }

}  // namespace steincc
