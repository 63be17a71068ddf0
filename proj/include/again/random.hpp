#pragma once

#include <cstdint>
#include <random>

namespace again {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named streams so call sites don't collide.
enum class Stream : std::uint64_t {
  init = 1,
  split = 2,
  batches = 3,
  sampling = 4,
  dropout = 5,
  prior = 6,
  adversarial_batches = 7,
  noise = 8,
  evaluation = 9,
};

inline Rng make_rng(std::uint64_t seed, Stream s, std::uint64_t sub = 0) {
  return Rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(s)), sub));
}

}  // namespace again
