// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace steerkit {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a stream key from (seed, stream, generation). Distinct triples give
/// statistically independent streams.
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t generation) noexcept;

/// Reserved stream ids. Particle slots use ids [0, kReservedStreamBase).
inline constexpr std::uint64_t kReservedStreamBase = 1ULL << 40;
inline constexpr std::uint64_t kResampleStream = kReservedStreamBase + 1;
inline constexpr std::uint64_t kInitGeneration = 1ULL << 40;
inline constexpr std::uint64_t kTerminalGeneration = (1ULL << 40) + 1;

/// Counter-based generator: output n is mix64(key + n * golden). Satisfies
/// UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t generation) noexcept
      : key_(stream_key(seed, stream, generation)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ ^ (counter_ * 0xD1B54A32D192ED03ULL));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace steerkit
