#pragma once

#include <cstdint>
#include <random>

namespace cdrlink {

/// splitmix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `tag` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix_seed(mix_seed(seed) ^ (tag * 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

}  // namespace cdrlink
