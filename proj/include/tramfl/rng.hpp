#pragma once

#include <cstdint>
#include <random>

namespace tramfl {

using Rng = std::mt19937_64;

// Named sub-streams of a trial seed. Each consumer of randomness in a trial
// draws from its own stream so adding draws in one place never shifts another.
enum class Stream : std::uint32_t {
  init = 1,
  placement = 2,
  batches = 3,
  routing = 4,
  partition = 5,
  synthetic_means = 6,
  synthetic_samples = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace tramfl
