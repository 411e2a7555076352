#pragma once

#include <cstdint>
#include <random>

namespace mildlab {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based stream id for path i of sweep point j.
std::uint64_t stream_id(std::uint64_t base_seed, std::uint64_t sweep_index, std::uint64_t path_index);

// Independent sub-stream of an existing stream (e.g. the initial datum of a path).
std::uint64_t substream(std::uint64_t stream, std::uint64_t tag);

inline constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;
inline constexpr std::uint64_t kInitialTag = 0x696e6974ULL;

}  // namespace mildlab
