#pragma once

#include <cstdint>
#include <random>

namespace regimelq {

using RngStream = std::mt19937_64;

/// Purpose tags keep the Brownian and regime draws of one path independent.
enum class StreamPurpose : std::uint32_t { brownian = 0, regime = 1, generic = 2 };

/// splitmix64 finaliser; a cheap bijective mixer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based substream: the stream for (master_seed, index, purpose) is a
/// pure function of its arguments, so results do not depend on which thread
/// simulates which path.
inline RngStream substream(std::uint64_t master_seed, std::uint64_t index,
                           StreamPurpose purpose = StreamPurpose::generic) {
  const std::uint64_t key = mix64(mix64(mix64(master_seed) ^ index) ^ static_cast<std::uint64_t>(purpose));
  return RngStream(key);
}

}  // namespace regimelq
