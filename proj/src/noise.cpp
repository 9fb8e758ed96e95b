#include "cusp/noise.hpp"

#include <array>

namespace cusp {

std::mt19937_64 NoiseStream::engine() const {
  const std::array<std::uint32_t, 4> words{
      static_cast<std::uint32_t>(master_seed),
      static_cast<std::uint32_t>(master_seed >> 32),
      static_cast<std::uint32_t>(replicate_index),
      static_cast<std::uint32_t>(replicate_index >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace cusp
