#pragma once

#include <cstdint>
#include <random>

namespace debias {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x51ed2701ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index) {
  return mix64(derive_seed(seed, stream) ^ mix64(index));
}

// Named streams so that adding a consumer never shifts another one's draws.
namespace stream {
inline constexpr std::uint64_t kEncoderInit = 1;
inline constexpr std::uint64_t kDetectorInit = 2;
inline constexpr std::uint64_t kEpochShuffle = 3;
inline constexpr std::uint64_t kControlLabels = 4;
inline constexpr std::uint64_t kSplit = 5;
inline constexpr std::uint64_t kBalance = 6;
inline constexpr std::uint64_t kProbe = 7;
inline constexpr std::uint64_t kPermutation = 8;
inline constexpr std::uint64_t kPosthocDetector = 9;
}  // namespace stream

}  // namespace debias
