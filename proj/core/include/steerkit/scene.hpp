// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "steerkit/geometry.hpp"

namespace steerkit {

/// Parameters of a synthetic scene. Static geometry is a gently curved ground
/// patch plus a back wall, sampled on jittered grids; features are smooth
/// sinusoids of world position with values in [-1, 1].
struct SceneSpec {
  int frames = 25;
  int static_points = 30000;
  int width = 64;
  int height = 64;
  int channels = 16;
  double focal_scale = 2.0;        // fx = fy = focal_scale * width
  double feature_frequency = 18.0; // radians per scene unit
  double camera_distance = 1.6;
  double camera_elevation_deg = 25.0;
  double arc_degrees = 20.0;
  int dynamic_points = 1500;
  double dynamic_radius = 0.12;
  double trajectory_length = 0.5;  // 0 disables the dynamic object

  void validate() const;
  nlohmann::json to_json() const;
  static SceneSpec from_json(const nlohmann::json& j);
};

struct GroundTruthScene {
  SceneSpec spec;
  std::uint64_t seed = 0;
  FeaturedPoints static_points;
  std::vector<double> static_spacing;
  /// Dynamic object in its local frame; placed by dynamic_transform(time).
  FeaturedPoints dynamic_points;
  std::vector<double> dynamic_spacing;
  std::vector<CameraPose> nominal_poses;
  Intrinsics intrinsics;

  int frame_count() const noexcept { return static_cast<int>(nominal_poses.size()); }
  bool has_dynamic() const noexcept { return dynamic_points.size() > 0; }
  /// Rigid placement of the dynamic object at continuous frame time in [0, N-1].
  std::pair<Mat3, Vec3> dynamic_transform(double frame_time) const;
  /// Static then dynamic points at the given time.
  FeaturedPoints points_at(double frame_time) const;
};

GroundTruthScene synth_scene(std::uint64_t seed, const SceneSpec& spec);

struct SceneRender {
  FeatureMap frame;
  PointMap pointmap;
  DynamicMask mask;
};

SceneRender render_scene(const GroundTruthScene& scene, const CameraPose& pose, double frame_time);

/// Frames with their indices in the full video.
struct FrameStack {
  std::vector<int> indices;
  std::vector<FeatureMap> frames;

  std::size_t size() const noexcept { return frames.size(); }
};

/// Frames rendered from the nominal poses.
FrameStack render_nominal(const GroundTruthScene& scene, const std::vector<int>& indices);

struct OracleOptions {
  double noise = 0.0;         // eta
  std::uint64_t noise_seed = 0x0AC1E;
};

/// Ground-truth reconstructions of the frames' indices. Noise is zero-mean
/// Gaussian with standard deviation eta on positions and translations and
/// eta radians on rotation axis-angle components.
SceneEstimate3D oracle_reconstruct_3d(const FrameStack& frames, const GroundTruthScene& scene,
                                      const OracleOptions& options = {});
SceneEstimate4D oracle_reconstruct_4d(const FrameStack& frames, const GroundTruthScene& scene,
                                      const OracleOptions& options = {});

}  // namespace steerkit
