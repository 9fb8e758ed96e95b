#pragma once

#include <cstdint>
#include <random>

namespace cusp {

/// Identifies one reproducible stream of Gaussian noise.
///
/// The engine is seeded from the full 128 bits of (master_seed,
/// replicate_index), so identical pairs reproduce identical draws.
struct NoiseStream {
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_index = 0;

  std::mt19937_64 engine() const;
};

/// Packs (group, item) into a replicate index. The map is injective over
/// its full 32-bit x 32-bit domain.
constexpr std::uint64_t stream_index(std::uint32_t group, std::uint32_t item) {
  return (static_cast<std::uint64_t>(group) << 32) | item;
}

/// A family of streams sharing a master seed and a group tag, e.g. one
/// noise level of an experiment or one batch of limit-law samples.
struct StreamFamily {
  std::uint64_t master_seed = 0;
  std::uint32_t group = 0;

  NoiseStream at(std::uint32_t item) const {
    return NoiseStream{master_seed, stream_index(group, item)};
  }
};

}  // namespace cusp
