#pragma once

#include <cstdint>

#include "bgreplace/tensor.hpp"

namespace bgreplace {

/// Derives an independent stream seed from (seed, stage, frame, step) so any
/// stage or frame can be regenerated without replaying earlier draws.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t frame = 0, std::uint64_t step = 0);

/// Standard-normal samples from a Mersenne Twister seeded with `stream`.
Array4<double> gaussian_noise(const Shape4& shape, std::uint64_t stream);

/// Stage identifiers for stream_seed.
namespace rng_stage {
inline constexpr std::uint64_t kBackground = 1;
inline constexpr std::uint64_t kHarmonize = 2;
inline constexpr std::uint64_t kEnhance = 3;
inline constexpr std::uint64_t kResample = 4;
inline constexpr std::uint64_t kVerify = 5;
inline constexpr std::uint64_t kFixture = 6;
}  // namespace rng_stage

}  // namespace bgreplace
