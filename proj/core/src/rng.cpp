// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/rng.hpp"

namespace steerkit {

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t generation) noexcept {
  std::uint64_t h = mix64(seed ^ 0x5EED5EED5EED5EEDULL);
  h = mix64(h ^ stream);
  h = mix64(h ^ (generation * 0x9E3779B97F4A7C15ULL));
  return h;
}

}  // namespace steerkit
