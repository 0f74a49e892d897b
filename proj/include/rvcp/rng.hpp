#pragma once

#include <cstdint>
#include <random>

namespace rvcp {

/// A (seed, stream) pair names one reproducible random sequence.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngSpec child(std::uint64_t stream) const { return {seed, stream}; }
};

using Engine = std::mt19937_64;

inline Engine make_engine(const RngSpec& spec) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                    static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(spec.stream_id),
                    static_cast<std::uint32_t>(spec.stream_id >> 32)};
  return Engine(seq);
}

}  // namespace rvcp
