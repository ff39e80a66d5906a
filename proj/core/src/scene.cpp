// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/scene.hpp"

#include <cmath>
#include <numbers>

#include "steerkit/error.hpp"
#include "steerkit/rng.hpp"

namespace steerkit {
namespace {

constexpr double kGroundX = 0.9;
constexpr double kGroundZ0 = -0.3;
constexpr double kWallZ = 0.8;
constexpr double kWallTop = 0.9;
const Vec3 kLookAt(0.0, 0.2, 0.35);

struct FeatureField {
  std::vector<Vec3> wave;  // direction scaled by frequency
  std::vector<double> phase;

  FeatureField(CounterRng& rng, int channels, double frequency) {
    for (int c = 0; c < channels; ++c) {
      const double dx = rng.normal();
      const double dy = rng.normal();
      const double dz = rng.normal();
      const Vec3 d = Vec3(dx, dy, dz).normalized();
      wave.push_back(d * frequency * (0.8 + 0.4 * rng.uniform()));
      phase.push_back(2.0 * std::numbers::pi * rng.uniform());
    }
  }

  void append(const Vec3& p, std::vector<double>& out) const {
    for (std::size_t c = 0; c < wave.size(); ++c) out.push_back(std::sin(wave[c].dot(p) + phase[c]));
  }
};

Vec3 gaussian_vec(CounterRng& rng, double sigma) {
  const double x = rng.normal(), y = rng.normal(), z = rng.normal();
  return Vec3(x, y, z) * sigma;
}

CameraPose perturb_pose(const CameraPose& pose, CounterRng& rng, double eta) {
  if (eta == 0.0) return pose;
  CameraPose out;
  out.rotation = axis_angle_to_matrix(gaussian_vec(rng, eta)) * pose.rotation;
  out.translation = pose.translation + gaussian_vec(rng, eta);
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  require(frames >= 1, ErrorCode::invalid_argument, "scene needs >= 1 frame");
  require(static_points >= 100, ErrorCode::invalid_argument, "scene needs >= 100 static points");
  require(width >= 1 && height >= 1, ErrorCode::invalid_argument, "image size must be positive");
  require(channels >= 1, ErrorCode::invalid_argument, "scene needs >= 1 feature channel");
  require(focal_scale > 0 && feature_frequency >= 0 && camera_distance > 0, ErrorCode::invalid_argument,
          "invalid camera or feature parameters");
  require(dynamic_points >= 0 && dynamic_radius > 0 && trajectory_length >= 0, ErrorCode::invalid_argument,
          "invalid dynamic object parameters");
}

nlohmann::json SceneSpec::to_json() const {
  return {{"frames", frames},
          {"static_points", static_points},
          {"width", width},
          {"height", height},
          {"channels", channels},
          {"focal_scale", focal_scale},
          {"feature_frequency", feature_frequency},
          {"camera_distance", camera_distance},
          {"camera_elevation_deg", camera_elevation_deg},
          {"arc_degrees", arc_degrees},
          {"dynamic_points", dynamic_points},
          {"dynamic_radius", dynamic_radius},
          {"trajectory_length", trajectory_length}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec s;
  const nlohmann::json defaults = s.to_json();
  for (const auto& [key, value] : j.items()) {
    require(defaults.contains(key), ErrorCode::config, "unknown scene field '" + key + "'");
  }
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("frames", s.frames);
  get("static_points", s.static_points);
  get("width", s.width);
  get("height", s.height);
  get("channels", s.channels);
  get("focal_scale", s.focal_scale);
  get("feature_frequency", s.feature_frequency);
  get("camera_distance", s.camera_distance);
  get("camera_elevation_deg", s.camera_elevation_deg);
  get("arc_degrees", s.arc_degrees);
  get("dynamic_points", s.dynamic_points);
  get("dynamic_radius", s.dynamic_radius);
  get("trajectory_length", s.trajectory_length);
  s.validate();
  return s;
}

std::pair<Mat3, Vec3> GroundTruthScene::dynamic_transform(double frame_time) const {
  const int n = frame_count();
  const double s = n > 1 ? frame_time / (n - 1) : 0.0;
  const double L = spec.trajectory_length;
  const Vec3 center(-0.5 * L + L * s, 0.18 + 0.03 * std::sin(2.0 * std::numbers::pi * s), 0.25);
  const Mat3 R = axis_angle_to_matrix(Vec3(0.0, 0.5 * std::numbers::pi * s, 0.0));
  return {R, center};
}

FeaturedPoints GroundTruthScene::points_at(double frame_time) const {
  FeaturedPoints out = static_points;
  if (!has_dynamic()) return out;
  const auto [R, c] = dynamic_transform(frame_time);
  out.positions.reserve(out.positions.size() + dynamic_points.size());
  for (const Vec3& p : dynamic_points.positions) out.positions.push_back(R * p + c);
  out.features.insert(out.features.end(), dynamic_points.features.begin(), dynamic_points.features.end());
  return out;
}

GroundTruthScene synth_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  GroundTruthScene scene;
  scene.spec = spec;
  scene.seed = seed;
  CounterRng rng(seed, 1, 0);

  const double a1 = 2.0 * std::numbers::pi * rng.uniform(), a2 = 2.0 * std::numbers::pi * rng.uniform();
  const double a3 = 2.0 * std::numbers::pi * rng.uniform(), a4 = 2.0 * std::numbers::pi * rng.uniform();
  const auto ground_height = [&](double x, double z) { return 0.04 * std::sin(3.0 * x + a1) * std::cos(2.5 * z + a2); };
  const auto wall_depth = [&](double x, double y) { return kWallZ + 0.03 * std::sin(4.0 * x + a3) * std::sin(3.0 * y + a4); };

  const FeatureField field(rng, spec.channels, spec.feature_frequency);
  const double ground_area = 2.0 * kGroundX * (kWallZ - kGroundZ0);
  const double wall_area = 2.0 * kGroundX * kWallTop;
  const double h = std::sqrt((ground_area + wall_area) / spec.static_points);

  FeaturedPoints& pts = scene.static_points;
  pts.channels = spec.channels;
  const auto add = [&](const Vec3& p) {
    pts.positions.push_back(p);
    field.append(p, pts.features);
    scene.static_spacing.push_back(h);
  };
  const int nx = std::max(1, static_cast<int>(std::lround(2.0 * kGroundX / h)));
  const int nz = std::max(1, static_cast<int>(std::lround((kWallZ - kGroundZ0) / h)));
  const int ny = std::max(1, static_cast<int>(std::lround(kWallTop / h)));
  const double hx = 2.0 * kGroundX / nx, hz = (kWallZ - kGroundZ0) / nz, hy = kWallTop / ny;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      const double x = -kGroundX + (ix + 0.5 + 0.7 * (rng.uniform() - 0.5)) * hx;
      const double z = kGroundZ0 + (iz + 0.5 + 0.7 * (rng.uniform() - 0.5)) * hz;
      add(Vec3(x, ground_height(x, z), z));
    }
  }
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double x = -kGroundX + (ix + 0.5 + 0.7 * (rng.uniform() - 0.5)) * hx;
      const double y = (iy + 0.5 + 0.7 * (rng.uniform() - 0.5)) * hy;
      add(Vec3(x, y, wall_depth(x, y)));
    }
  }

  if (spec.trajectory_length > 0.0 && spec.dynamic_points > 0) {
    const FeatureField object_field(rng, spec.channels, spec.feature_frequency);
    FeaturedPoints& dyn = scene.dynamic_points;
    dyn.channels = spec.channels;
    const int n = spec.dynamic_points;
    const double r = spec.dynamic_radius;
    const double spacing = std::sqrt(4.0 * std::numbers::pi * r * r / n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double y = 1.0 - 2.0 * (i + 0.5) / n;
      const double rad = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double phi = golden * i;
      const Vec3 p(r * rad * std::cos(phi), r * y, r * rad * std::sin(phi));
      dyn.positions.push_back(p);
      object_field.append(p, dyn.features);
      scene.dynamic_spacing.push_back(spacing);
    }
  }

  Intrinsics& K = scene.intrinsics;
  K.width = spec.width;
  K.height = spec.height;
  K.fx = K.fy = spec.focal_scale * spec.width;
  K.cx = 0.5 * spec.width;
  K.cy = 0.5 * spec.height;

  const double elev = spec.camera_elevation_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < spec.frames; ++i) {
    const double s = spec.frames > 1 ? static_cast<double>(i) / (spec.frames - 1) - 0.5 : 0.0;
    const double az = spec.arc_degrees * s * std::numbers::pi / 180.0;
    const Vec3 dir(std::sin(az) * std::cos(elev), std::sin(elev), -std::cos(az) * std::cos(elev));
    scene.nominal_poses.push_back(look_at(kLookAt + spec.camera_distance * dir, kLookAt));
  }
  return scene;
}

SceneRender render_scene(const GroundTruthScene& scene, const CameraPose& pose, double frame_time) {
  const int n = scene.frame_count();
  require(frame_time >= 0.0 && frame_time <= n - 1, ErrorCode::invalid_argument,
          "frame time " + std::to_string(frame_time) + " outside [0, " + std::to_string(n - 1) + "]");
  const FeaturedPoints pts = scene.points_at(frame_time);
  SplatResult splat = splat_points(pts, {}, pose, scene.intrinsics);
  const Intrinsics& K = scene.intrinsics;
  SceneRender out{std::move(splat.features), PointMap(K.height, K.width), DynamicMask(K.height, K.width)};
  const std::size_t n_static = scene.static_points.size();
  for (std::size_t pix = 0; pix < splat.owner.size(); ++pix) {
    const std::int64_t o = splat.owner[pix];
    if (o < 0) continue;
    out.pointmap.points[pix] = pts.positions[static_cast<std::size_t>(o)];
    out.pointmap.validity.values[pix] = 1;
    out.mask.values[pix] = static_cast<std::size_t>(o) >= n_static ? 1 : 0;
  }
  return out;
}

FrameStack render_nominal(const GroundTruthScene& scene, const std::vector<int>& indices) {
  FrameStack stack;
  for (int i : indices) {
    require(i >= 0 && i < scene.frame_count(), ErrorCode::invalid_argument, "frame index out of range");
    stack.indices.push_back(i);
    stack.frames.push_back(render_scene(scene, scene.nominal_poses[static_cast<std::size_t>(i)], i).frame);
  }
  return stack;
}

SceneEstimate3D oracle_reconstruct_3d(const FrameStack& frames, const GroundTruthScene& scene,
                                      const OracleOptions& options) {
  require(options.noise >= 0.0, ErrorCode::invalid_argument, "noise level must be >= 0");
  SceneEstimate3D est;
  GaussianSet& g = est.gaussians;
  const FeaturedPoints& pts = scene.static_points;
  g.channels = pts.channels;
  g.means = pts.positions;
  g.opacities.assign(pts.size(), 1.0);
  g.colors = pts.features;
  g.covariances.reserve(pts.size());
  // Footprint radius of half the point spacing: neighbours overlap enough to
  // close holes without blurring the feature field.
  for (double s : scene.static_spacing) g.covariances.push_back(Mat3::Identity() * (0.25 * s * s));
  if (options.noise > 0.0) {
    CounterRng rng(options.noise_seed, 0, 3);
    for (Vec3& m : g.means) m += gaussian_vec(rng, options.noise);
  }
  for (int idx : frames.indices) {
    require(idx >= 0 && idx < scene.frame_count(), ErrorCode::invalid_argument, "frame index out of range");
    CounterRng rng(options.noise_seed, static_cast<std::uint64_t>(idx) + 1, 3);
    est.poses.push_back(perturb_pose(scene.nominal_poses[static_cast<std::size_t>(idx)], rng, options.noise));
  }
  return est;
}

SceneEstimate4D oracle_reconstruct_4d(const FrameStack& frames, const GroundTruthScene& scene,
                                      const OracleOptions& options) {
  require(options.noise >= 0.0, ErrorCode::invalid_argument, "noise level must be >= 0");
  SceneEstimate4D est;
  for (int idx : frames.indices) {
    require(idx >= 0 && idx < scene.frame_count(), ErrorCode::invalid_argument, "frame index out of range");
    const CameraPose& nominal = scene.nominal_poses[static_cast<std::size_t>(idx)];
    SceneRender r = render_scene(scene, nominal, idx);
    CounterRng rng(options.noise_seed, static_cast<std::uint64_t>(idx) + 1, 4);
    est.poses.push_back(perturb_pose(nominal, rng, options.noise));
    if (options.noise > 0.0) {
      for (std::size_t pix = 0; pix < r.pointmap.points.size(); ++pix) {
        if (r.pointmap.validity.values[pix]) r.pointmap.points[pix] += gaussian_vec(rng, options.noise);
      }
    }
    est.pointmaps.push_back(std::move(r.pointmap));
    est.masks.push_back(std::move(r.mask));
  }
  return est;
}

}  // namespace steerkit
