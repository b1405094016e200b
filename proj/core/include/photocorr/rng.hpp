#pragma once

#include <cstdint>
#include <random>

namespace photocorr {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

// Sub-stream identifiers, kept distinct across modules.
namespace seed_stream {
inline constexpr std::uint64_t kEmitter = 1;
inline constexpr std::uint64_t kOptics = 2;
inline constexpr std::uint64_t kRouting = 10;
inline constexpr std::uint64_t kBeamSplitter1 = 11;
inline constexpr std::uint64_t kBeamSplitter2 = 12;
inline constexpr std::uint64_t kDetector0 = 20;
inline constexpr std::uint64_t kDetector1 = 21;
inline constexpr std::uint64_t kDarkCounts = 30;
inline constexpr std::uint64_t kEmitterBlock = 1ull << 40;
}  // namespace seed_stream

}  // namespace photocorr
