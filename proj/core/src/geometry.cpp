// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "steerkit/error.hpp"

namespace steerkit {
namespace {

constexpr double kMinDepth = 1e-6;
constexpr double kDepthTie = 1e-12;
constexpr double kTransmittanceCutoff = 1e-4;
constexpr double kFootprintSupport = 3.0;  // footprint truncated at 3 radii

}  // namespace

bool CameraPose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 axis_angle_to_matrix(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

bool Intrinsics::is_valid() const {
  return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx <= width && cy >= 0 && cy <= height;
}

nlohmann::json Intrinsics::to_json() const {
  return {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy}, {"width", width}, {"height", height}};
}

Intrinsics Intrinsics::from_json(const nlohmann::json& j) {
  Intrinsics K;
  K.fx = j.at("fx").get<double>();
  K.fy = j.at("fy").get<double>();
  K.cx = j.at("cx").get<double>();
  K.cy = j.at("cy").get<double>();
  K.width = j.at("width").get<int>();
  K.height = j.at("height").get<int>();
  require(K.is_valid(), ErrorCode::invalid_argument, "invalid intrinsics");
  return K;
}

Projection project(const Vec3& point, const CameraPose& pose, const Intrinsics& K) {
  require(point.allFinite(), ErrorCode::invalid_argument, "point is not finite");
  const Vec3 pc = pose.to_camera(point);
  if (!(pc.z() > kMinDepth)) fail(ErrorCode::behind_camera, "depth " + std::to_string(pc.z()) + " <= 1e-6");
  return {K.fx * pc.x() / pc.z() + K.cx, K.fy * pc.y() / pc.z() + K.cy, pc.z()};
}

Vec3 unproject(double u, double v, double depth, const CameraPose& pose, const Intrinsics& K) {
  require(depth > 0.0, ErrorCode::invalid_argument, "depth must be positive");
  const Vec3 pc((u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, depth);
  return pose.rotation.transpose() * (pc - pose.translation);
}

FeatureMap::FeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels),
      data_(static_cast<std::size_t>(height) * width * channels, 0.0) {
  require(height >= 0 && width >= 0 && channels >= 1, ErrorCode::invalid_argument, "invalid feature map shape");
}

std::size_t BinaryMap::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

SplatResult splat_points(const FeaturedPoints& points, const std::vector<std::uint8_t>& valid,
                         const CameraPose& pose, const Intrinsics& K) {
  require(points.channels >= 1, ErrorCode::invalid_argument, "points need >= 1 channel");
  require(valid.empty() || valid.size() == points.size(), ErrorCode::invalid_argument, "validity size mismatch");
  const int W = K.width, H = K.height, C = points.channels;
  SplatResult out{FeatureMap(H, W, C), BinaryMap(H, W), std::vector<std::int64_t>(static_cast<std::size_t>(H) * W, -1)};
  std::vector<double> zbuf(static_cast<std::size_t>(H) * W, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const Vec3 pc = pose.to_camera(points.positions[i]);
    if (!(pc.z() > kMinDepth)) continue;
    const long px = nearest_pixel(K.fx * pc.x() / pc.z() + K.cx);
    const long py = nearest_pixel(K.fy * pc.y() / pc.z() + K.cy);
    if (px < 0 || py < 0 || px >= W || py >= H) continue;
    const std::size_t pix = static_cast<std::size_t>(py) * W + static_cast<std::size_t>(px);
    if (out.owner[pix] >= 0 && !(pc.z() < zbuf[pix] - kDepthTie)) continue;
    out.owner[pix] = static_cast<std::int64_t>(i);
    zbuf[pix] = pc.z();
  }
  for (std::size_t pix = 0; pix < out.owner.size(); ++pix) {
    if (out.owner[pix] < 0) continue;
    out.coverage.values[pix] = 1;
    std::copy_n(points.feature(static_cast<std::size_t>(out.owner[pix])), C, out.features.pixel(pix));
  }
  return out;
}

void GaussianSet::validate() const {
  const std::size_t n = means.size();
  require(opacities.size() == n && covariances.size() == n, ErrorCode::invalid_argument, "Gaussian set arrays differ in size");
  require(channels >= 1 && colors.size() == n * static_cast<std::size_t>(channels), ErrorCode::invalid_argument,
          "Gaussian colors have the wrong size");
  for (std::size_t i = 0; i < n; ++i) {
    require(opacities[i] >= 0.0 && opacities[i] <= 1.0, ErrorCode::invalid_argument, "opacity outside [0, 1]");
    const Mat3& S = covariances[i];
    require(means[i].allFinite() && S.allFinite(), ErrorCode::invalid_argument, "non-finite Gaussian");
    require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-9, ErrorCode::invalid_argument, "covariance not symmetric");
  }
}

GaussianRenderer::GaussianRenderer(const GaussianSet& gaussians) : set_(gaussians) {
  set_.validate();
  sigma_.resize(set_.size());
  for (std::size_t i = 0; i < set_.size(); ++i) {
    const Mat3& S = set_.covariances[i];
    const bool isotropic = S(0, 1) == 0.0 && S(0, 2) == 0.0 && S(1, 2) == 0.0 && S(0, 0) == S(1, 1) && S(1, 1) == S(2, 2);
    double lmax;
    if (isotropic) {
      lmax = S(0, 0);
    } else {
      Eigen::SelfAdjointEigenSolver<Mat3> es;
      es.computeDirect(S, Eigen::EigenvaluesOnly);
      lmax = es.eigenvalues().maxCoeff();
    }
    require(lmax >= -1e-12, ErrorCode::invalid_argument, "covariance not positive semi-definite");
    sigma_[i] = std::sqrt(std::max(lmax, 0.0));
  }
}

FeatureMap GaussianRenderer::render(const CameraPose& pose, const Intrinsics& K) const {
  const int W = K.width, H = K.height;
  const int C = std::max(set_.channels, 1);
  FeatureMap out(H, W, C);
  if (set_.size() == 0) return out;

  struct Splat {
    double depth, u, v, radius;
    std::size_t index;
  };
  std::vector<Splat> splats;
  splats.reserve(set_.size());
  for (std::size_t i = 0; i < set_.size(); ++i) {
    const Vec3 pc = pose.to_camera(set_.means[i]);
    if (!(pc.z() > kMinDepth)) continue;
    const double r = sigma_[i] * K.fx / pc.z();
    if (!(r > 0.0) || set_.opacities[i] == 0.0) continue;
    const double u = K.fx * pc.x() / pc.z() + K.cx;
    const double v = K.fy * pc.y() / pc.z() + K.cy;
    const double reach = kFootprintSupport * r;
    if (u + reach < -0.5 || v + reach < -0.5 || u - reach > W - 0.5 || v - reach > H - 0.5) continue;
    splats.push_back({pc.z(), u, v, r, i});
  }

  // Canonical order: depth, then every primitive attribute, so equal keys mean
  // identical primitives and input order cannot matter.
  const auto key_less = [&](const Splat& a, const Splat& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    const std::size_t i = a.index, j = b.index;
    for (int d = 0; d < 3; ++d) {
      if (set_.means[i][d] != set_.means[j][d]) return set_.means[i][d] < set_.means[j][d];
    }
    if (set_.opacities[i] != set_.opacities[j]) return set_.opacities[i] < set_.opacities[j];
    for (int d = 0; d < 9; ++d) {
      const double x = set_.covariances[i](d / 3, d % 3), y = set_.covariances[j](d / 3, d % 3);
      if (x != y) return x < y;
    }
    const double* ci = set_.colors.data() + i * C;
    const double* cj = set_.colors.data() + j * C;
    return std::lexicographical_compare(ci, ci + C, cj, cj + C);
  };
  std::sort(splats.begin(), splats.end(), key_less);

  std::vector<double> transmittance(static_cast<std::size_t>(H) * W, 1.0);
  for (const Splat& s : splats) {
    const double reach = kFootprintSupport * s.radius;
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.u - reach)));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(s.u + reach)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.v - reach)));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(s.v + reach)));
    const double inv2r2 = 1.0 / (2.0 * s.radius * s.radius);
    const double o = set_.opacities[s.index];
    const double* color = set_.colors.data() + s.index * C;
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - s.v;
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - s.u;
        const double d2 = dx * dx + dy * dy;
        if (d2 > reach * reach) continue;
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        double& T = transmittance[pix];
        if (T < kTransmittanceCutoff) continue;
        const double alpha = o * std::exp(-d2 * inv2r2);
        const double w = T * alpha;
        double* dst = out.pixel(pix);
        for (int c = 0; c < C; ++c) dst[c] += w * color[c];
        T *= 1.0 - alpha;
      }
    }
  }
  return out;
}

FeatureMap render_gaussians(const GaussianSet& gaussians, const CameraPose& pose, const Intrinsics& K) {
  return GaussianRenderer(gaussians).render(pose, K);
}

std::vector<float> pose_to_floats(const CameraPose& pose) {
  std::vector<float> v(12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[static_cast<std::size_t>(r * 4 + c)] = static_cast<float>(pose.rotation(r, c));
    v[static_cast<std::size_t>(r * 4 + 3)] = static_cast<float>(pose.translation[r]);
  }
  return v;
}

CameraPose pose_from_floats(const float* values) {
  CameraPose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = values[r * 4 + c];
    pose.translation[r] = values[r * 4 + 3];
  }
  return pose;
}

}  // namespace steerkit
