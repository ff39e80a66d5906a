// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "steerkit/geometry.hpp"

namespace steerkit {

/// Layout: "F32T", u16 version (1), u16 ndim, ndim x u32 dims, then
/// row-major f32 payload. Every field is little-endian.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

// Conversions for the types that cross file boundaries.
Tensor to_tensor(const FeatureMap& map);                 // (H, W, C)
FeatureMap feature_map_from_tensor(const Tensor& t);
Tensor to_tensor(const CameraPose& pose);                // (3, 4)
CameraPose pose_from_tensor(const Tensor& t);
Tensor to_tensor(const GaussianSet& set);                // (P, 13 + C)
GaussianSet gaussians_from_tensor(const Tensor& t);
Tensor to_tensor(const PointMap& map);                   // (H, W, 3); invalid pixels are NaN
PointMap pointmap_from_tensor(const Tensor& t);
Tensor to_tensor(const BinaryMap& mask);                 // (H, W) of 0/1
BinaryMap mask_from_tensor(const Tensor& t);
Tensor to_tensor(const std::vector<std::vector<double>>& rows);  // (n, d)

}  // namespace steerkit
