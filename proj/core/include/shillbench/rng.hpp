#pragma once

#include <cstdint>
#include <random>

namespace shillbench {

using Rng = std::mt19937_64;

/// Independent generator for sub-stream `stream` of `seed`. Two different
/// (seed, stream) pairs give unrelated sequences, so per-profile or per-epoch
/// generators can be created in any order without changing results.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

/// Well-known sub-stream ids so unrelated stages never share a generator.
namespace streams {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kTargets = 2;
inline constexpr std::uint64_t kProfiles = 1'000'000;
inline constexpr std::uint64_t kTraining = 3;
inline constexpr std::uint64_t kSurrogate = 4;
}  // namespace streams

}  // namespace shillbench
