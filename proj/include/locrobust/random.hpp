#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace locrobust {

using Rng = std::mt19937_64;

/// Mixes a master seed with a path of integer keys (replication, covariate
/// cell, purpose tag...) into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

/// Purpose tags for substreams.
enum class Stream : std::uint64_t {
  kData = 1,
  kPanel = 2,
  kFreshDraws = 3,
  kBundle = 4,
  kDetection = 5,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace locrobust
