// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

namespace steerkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// World-to-camera rigid transform: p_cam = R * p_world + t.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
  Vec3 center() const { return -(rotation.transpose() * translation); }
  bool is_valid(double tol = 1e-9) const;
};

/// Rotation matrix of an axis-angle vector (Rodrigues).
Mat3 axis_angle_to_matrix(const Vec3& omega);

/// World-to-camera pose of a camera at `eye` looking at `target`, with image
/// y pointing along -up.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

struct Intrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  bool is_valid() const;
  nlohmann::json to_json() const;
  static Intrinsics from_json(const nlohmann::json& j);
};

struct Projection {
  double u = 0.0, v = 0.0, depth = 0.0;
};

/// Pixel centres sit at integer coordinates. Throws behind_camera when depth <= 1e-6.
Projection project(const Vec3& point, const CameraPose& pose, const Intrinsics& K);

Vec3 unproject(double u, double v, double depth, const CameraPose& pose, const Intrinsics& K);

/// Nearest pixel of a continuous coordinate: floor(u + 0.5).
inline long nearest_pixel(double u) { return static_cast<long>(std::floor(u + 0.5)); }

/// H x W x C feature grid, row-major with channels innermost.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  double* pixel(std::size_t index) noexcept { return data_.data() + index * channels_; }
  const double* pixel(std::size_t index) const noexcept { return data_.data() + index * channels_; }
  double* pixel(int y, int x) noexcept { return pixel(static_cast<std::size_t>(y) * width_ + x); }
  const double* pixel(int y, int x) const noexcept { return pixel(static_cast<std::size_t>(y) * width_ + x); }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<double> data_;
};

/// H x W binary grid. Used for dynamic masks, coverage and validity.
struct BinaryMap {
  int height = 0, width = 0;
  std::vector<std::uint8_t> values;

  BinaryMap() = default;
  BinaryMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  std::size_t count() const;
  bool operator==(const BinaryMap&) const = default;
};

using DynamicMask = BinaryMap;

struct PointMap {
  int height = 0, width = 0;
  std::vector<Vec3> points;
  BinaryMap validity;

  PointMap() = default;
  PointMap(int h, int w) : height(h), width(w), points(static_cast<std::size_t>(h) * w, Vec3::Zero()), validity(h, w) {}
};

/// Points with C-dimensional features stored as a flat row-major array.
struct FeaturedPoints {
  std::vector<Vec3> positions;
  std::vector<double> features;  // positions.size() * channels
  int channels = 0;

  std::size_t size() const noexcept { return positions.size(); }
  const double* feature(std::size_t i) const noexcept { return features.data() + i * channels; }
};

struct SplatResult {
  FeatureMap features;
  BinaryMap coverage;
  /// Index of the owning source point per pixel, or -1.
  std::vector<std::int64_t> owner;
};

/// Nearest-point z-buffer splat. `valid` may be empty (all valid). Depth ties
/// within 1e-12 keep the lower source index. Points behind the camera or off
/// image are skipped.
SplatResult splat_points(const FeaturedPoints& points, const std::vector<std::uint8_t>& valid,
                         const CameraPose& pose, const Intrinsics& K);

struct GaussianSet {
  std::vector<Vec3> means;
  std::vector<double> opacities;
  std::vector<Mat3> covariances;
  std::vector<double> colors;  // size() * channels
  int channels = 0;

  std::size_t size() const noexcept { return means.size(); }
  void validate() const;
};

/// Simplified isotropic-footprint compositor. Output does not depend on the
/// order of primitives in the set.
FeatureMap render_gaussians(const GaussianSet& gaussians, const CameraPose& pose, const Intrinsics& K);

/// Caches per-primitive footprint radii so one set renders cheaply from many poses.
class GaussianRenderer {
 public:
  explicit GaussianRenderer(const GaussianSet& gaussians);
  FeatureMap render(const CameraPose& pose, const Intrinsics& K) const;

 private:
  const GaussianSet& set_;
  std::vector<double> sigma_;  // sqrt of the largest covariance eigenvalue
};

struct SceneEstimate3D {
  GaussianSet gaussians;
  std::vector<CameraPose> poses;
};

struct SceneEstimate4D {
  std::vector<PointMap> pointmaps;
  std::vector<DynamicMask> masks;
  std::vector<CameraPose> poses;
};

/// Tensor conversions. Pose tensor is (3, 4) = [R | t]; Gaussian rows are
/// mean(3), opacity(1), covariance(9, row-major), color(C).
std::vector<float> pose_to_floats(const CameraPose& pose);
CameraPose pose_from_floats(const float* values);

}  // namespace steerkit
