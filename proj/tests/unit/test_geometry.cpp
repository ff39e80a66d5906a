// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "steerkit/geometry.hpp"
#include "steerkit/rng.hpp"
#include "steerkit/scene.hpp"
#include "test_util.hpp"

namespace steerkit {
namespace {

Intrinsics K128() {
  Intrinsics K;
  K.fx = K.fy = 100.0;
  K.cx = K.cy = 64.0;
  K.width = K.height = 128;
  return K;
}

CameraPose random_pose(CounterRng& rng) {
  CameraPose p;
  p.rotation = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()));
  p.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
  return p;
}

TEST(Project, OpticalAxisExamples) {
  const Intrinsics K = K128();
  const Projection a = project(Vec3(0, 0, 2), CameraPose{}, K);
  EXPECT_EQ(a.u, 64.0);
  EXPECT_EQ(a.v, 64.0);
  EXPECT_EQ(a.depth, 2.0);
  const Projection b = project(Vec3(0.02, 0, 2), CameraPose{}, K);
  EXPECT_NEAR(b.u, 65.0, 1e-12);
  EXPECT_EQ(b.v, 64.0);
  EXPECT_ERROR_CODE(project(Vec3(0, 0, -1), CameraPose{}, K), ErrorCode::behind_camera);
}

TEST(Unproject, ExamplesAndPrecondition) {
  const Intrinsics K = K128();
  EXPECT_EQ(unproject(64, 64, 3.0, CameraPose{}, K), Vec3(0, 0, 3.0));
  EXPECT_ERROR_CODE(unproject(1, 1, 0.0, CameraPose{}, K), ErrorCode::invalid_argument);
}

TEST(Unproject, InvertsProjectOverRandomPoses) {
  const Intrinsics K = K128();
  CounterRng rng(11, 0, 0);
  for (int p = 0; p < 100; ++p) {
    const CameraPose pose = random_pose(rng);
    for (int i = 0; i < 10000; ++i) {
      const double u = rng.uniform() * 128, v = rng.uniform() * 128, d = 0.1 + 10 * rng.uniform();
      const Vec3 X = unproject(u, v, d, pose, K);
      const Projection back = project(X, pose, K);
      ASSERT_NEAR(back.u, u, 1e-9);
      ASSERT_NEAR(back.v, v, 1e-9);
      ASSERT_NEAR(back.depth, d, 1e-9);
    }
  }
}

TEST(Pose, LookAtIsRigidAndFacesTarget) {
  const CameraPose p = look_at(Vec3(1, 2, -3), Vec3(0, 0.2, 0.3));
  EXPECT_TRUE(p.is_valid());
  const Vec3 c = p.to_camera(Vec3(0, 0.2, 0.3));
  EXPECT_NEAR(c.x(), 0.0, 1e-12);
  EXPECT_NEAR(c.y(), 0.0, 1e-12);
  EXPECT_GT(c.z(), 0.0);
  EXPECT_TRUE((p.center() - Vec3(1, 2, -3)).norm() < 1e-12);
  // +y world projects towards the top of the image.
  const Projection up = project(Vec3(0, 1.2, 0.3), p, K128());
  EXPECT_LT(up.v, 64.0);
}

TEST(Pose, AxisAngleMatchesRodrigues) {
  const Mat3 R = axis_angle_to_matrix(Vec3(0, 0, M_PI / 2));
  EXPECT_TRUE((R * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);
  EXPECT_EQ(axis_angle_to_matrix(Vec3::Zero()), Mat3::Identity());
  CounterRng rng(2, 0, 0);
  for (int i = 0; i < 100; ++i) {
    CameraPose p;
    p.rotation = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()) * 1e-9);
    EXPECT_TRUE(p.is_valid());
  }
}

FeaturedPoints points_with_features(std::vector<Vec3> pos, int C) {
  FeaturedPoints fp;
  fp.positions = std::move(pos);
  fp.channels = C;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    for (int c = 0; c < C; ++c) fp.features.push_back(static_cast<double>(i + 1) + 0.1 * c);
  }
  return fp;
}

TEST(Splat, SinglePointOnAxis) {
  const auto fp = points_with_features({Vec3(0, 0, 2)}, 3);
  const SplatResult s = splat_points(fp, {}, CameraPose{}, K128());
  EXPECT_EQ(s.coverage.count(), 1u);
  EXPECT_EQ(s.coverage.values[64 * 128 + 64], 1);
  EXPECT_EQ(s.features.pixel(64, 64)[0], 1.0);
  EXPECT_EQ(s.features.pixel(64, 64)[2], 1.2);
  EXPECT_EQ(s.owner[64 * 128 + 64], 0);
}

TEST(Splat, NearerPointWins) {
  for (bool near_first : {true, false}) {
    std::vector<Vec3> pos = near_first ? std::vector<Vec3>{Vec3(0, 0, 1), Vec3(0, 0, 2)}
                                       : std::vector<Vec3>{Vec3(0, 0, 2), Vec3(0, 0, 1)};
    const auto fp = points_with_features(pos, 1);
    const SplatResult s = splat_points(fp, {}, CameraPose{}, K128());
    EXPECT_EQ(s.owner[64 * 128 + 64], near_first ? 0 : 1);
    EXPECT_EQ(s.coverage.count(), 1u);
  }
}

TEST(Splat, DepthTieKeepsLowerIndex) {
  const auto fp = points_with_features({Vec3(0, 0, 2), Vec3(0.0001, 0, 2 - 5e-13), Vec3(0, 0.0001, 2 + 5e-13)}, 1);
  const SplatResult s = splat_points(fp, {}, CameraPose{}, K128());
  EXPECT_EQ(s.owner[64 * 128 + 64], 0);
  EXPECT_EQ(s.features.pixel(64, 64)[0], 1.0);
}

TEST(Splat, ValidityAndOffImagePointsSkipped) {
  const auto fp = points_with_features({Vec3(0, 0, 2), Vec3(10, 0, 1), Vec3(0, 0, -1)}, 1);
  const SplatResult s = splat_points(fp, {0, 1, 1}, CameraPose{}, K128());
  EXPECT_EQ(s.coverage.count(), 0u);
}

TEST(Splat, SelfConsistentWithOwnRender) {
  SceneSpec spec;
  spec.static_points = 4000;
  spec.dynamic_points = 300;
  spec.frames = 5;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GroundTruthScene scene = synth_scene(seed, spec);
    const int f = static_cast<int>(seed % 5);
    const SceneRender r = render_scene(scene, scene.nominal_poses[f], f);
    FeaturedPoints pts;
    pts.channels = spec.channels;
    for (std::size_t p = 0; p < r.frame.pixels(); ++p) {
      if (!r.pointmap.validity.values[p]) continue;
      pts.positions.push_back(r.pointmap.points[p]);
      pts.features.insert(pts.features.end(), r.frame.pixel(p), r.frame.pixel(p) + spec.channels);
    }
    const SplatResult s = splat_points(pts, {}, scene.nominal_poses[f], scene.intrinsics);
    EXPECT_EQ(s.coverage, r.pointmap.validity) << seed;
    EXPECT_EQ(s.features, r.frame) << seed;
  }
}

GaussianSet one_gaussian(const Vec3& mean, double var, double opacity, std::vector<double> color) {
  GaussianSet g;
  g.channels = static_cast<int>(color.size());
  g.means = {mean};
  g.opacities = {opacity};
  g.covariances = {Mat3::Identity() * var};
  g.colors = std::move(color);
  return g;
}

TEST(RenderGaussians, EmptySetIsZero) {
  GaussianSet g;
  g.channels = 4;
  const FeatureMap m = render_gaussians(g, CameraPose{}, K128());
  EXPECT_TRUE(std::all_of(m.data().begin(), m.data().end(), [](double v) { return v == 0.0; }));
}

TEST(RenderGaussians, OpaqueOnAxisPeaksAtPrincipalPoint) {
  const GaussianSet g = one_gaussian(Vec3(0, 0, 2), 0.01 * 0.01 * 4, 1.0, {1.0});
  const FeatureMap m = render_gaussians(g, CameraPose{}, K128());
  const double peak = m.pixel(64, 64)[0];
  EXPECT_EQ(peak, 1.0);
  for (int y = 0; y < 128; ++y) {
    for (int x = 0; x < 128; ++x) EXPECT_LE(m.pixel(y, x)[0], peak);
  }
  // Radially non-increasing along every ray from the centre.
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      if (!dx && !dy) continue;
      double prev = peak;
      for (int s = 1; s < 20; ++s) {
        const double v = m.pixel(64 + dy * s, 64 + dx * s)[0];
        EXPECT_LE(v, prev);
        prev = v;
      }
    }
  }
}

TEST(RenderGaussians, OpaqueFrontOccludesBackAtSharedCentre) {
  GaussianSet g = one_gaussian(Vec3(0, 0, 1), 1e-4, 1.0, {1.0, 0.0});
  const GaussianSet back = one_gaussian(Vec3(0, 0, 3), 1e-2, 1.0, {0.0, 1.0});
  g.means.push_back(back.means[0]);
  g.opacities.push_back(1.0);
  g.covariances.push_back(back.covariances[0]);
  g.colors.insert(g.colors.end(), back.colors.begin(), back.colors.end());
  const FeatureMap m = render_gaussians(g, CameraPose{}, K128());
  EXPECT_EQ(m.pixel(64, 64)[0], 1.0);
  EXPECT_EQ(m.pixel(64, 64)[1], 0.0);
}

TEST(RenderGaussians, PermutationInvariant) {
  GaussianSet g;
  g.channels = 3;
  CounterRng rng(9, 0, 0);
  for (int i = 0; i < 300; ++i) {
    g.means.push_back(Vec3(rng.normal() * 0.3, rng.normal() * 0.3, 2 + rng.uniform()));
    g.opacities.push_back(rng.uniform());
    const double a = 1e-4 + 1e-3 * rng.uniform();
    Mat3 S = Mat3::Identity() * a;
    if (i % 3 == 0) {
      S(0, 1) = S(1, 0) = 0.3 * a;
    }
    g.covariances.push_back(S);
    for (int c = 0; c < 3; ++c) g.colors.push_back(rng.normal());
  }
  // Duplicate primitives and exact depth ties must not depend on order either.
  for (int d = 0; d < 5; ++d) {
    g.means.push_back(g.means[d]);
    g.opacities.push_back(g.opacities[d]);
    g.covariances.push_back(g.covariances[d]);
    for (int c = 0; c < 3; ++c) g.colors.push_back(g.colors[3 * d + c]);
  }
  const FeatureMap ref = render_gaussians(g, CameraPose{}, K128());
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 shuffle_rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    GaussianSet h;
    h.channels = 3;
    for (std::size_t i : perm) {
      h.means.push_back(g.means[i]);
      h.opacities.push_back(g.opacities[i]);
      h.covariances.push_back(g.covariances[i]);
      for (int c = 0; c < 3; ++c) h.colors.push_back(g.colors[3 * i + c]);
    }
    EXPECT_EQ(render_gaussians(h, CameraPose{}, K128()), ref);
  }
}

TEST(RenderGaussians, RejectsInvalidSets) {
  GaussianSet g = one_gaussian(Vec3(0, 0, 2), 1e-3, 1.5, {1.0});
  EXPECT_ERROR_CODE(render_gaussians(g, CameraPose{}, K128()), ErrorCode::invalid_argument);
  g.opacities[0] = 1.0;
  g.covariances[0](0, 1) = 1e-3;
  EXPECT_ERROR_CODE(render_gaussians(g, CameraPose{}, K128()), ErrorCode::invalid_argument);
}

TEST(RenderGaussians, CachedRendererMatchesFreeFunction) {
  GaussianSet g = one_gaussian(Vec3(0.05, -0.02, 2), 4e-4, 0.7, {0.5, -0.25});
  const GaussianRenderer r(g);
  CounterRng rng(3, 0, 0);
  for (int i = 0; i < 5; ++i) {
    CameraPose p;
    p.rotation = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.05);
    EXPECT_EQ(r.render(p, K128()), render_gaussians(g, p, K128()));
  }
}

// A rigid motion applied to both the geometry and every camera leaves the renders unchanged.
TEST(Geometry, PoseInvariance) {
  SceneSpec spec;
  spec.static_points = 5000;
  spec.trajectory_length = 0.0;
  spec.frames = 4;
  const GroundTruthScene scene = synth_scene(3, spec);
  CounterRng rng(21, 0, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat3 Rg = axis_angle_to_matrix(Vec3(rng.normal(), rng.normal(), rng.normal()));
    const Vec3 tg(rng.normal(), rng.normal(), rng.normal());
    GroundTruthScene moved = scene;
    for (Vec3& p : moved.static_points.positions) p = Rg * p + tg;
    for (CameraPose& c : moved.nominal_poses) {
      const Mat3 R = c.rotation * Rg.transpose();
      c = CameraPose{R, c.translation - R * tg};
    }
    for (int f = 0; f < spec.frames; ++f) {
      const SceneRender a = render_scene(scene, scene.nominal_poses[f], f);
      const SceneRender b = render_scene(moved, moved.nominal_poses[f], f);
      EXPECT_EQ(a.frame, b.frame);
      EXPECT_EQ(a.mask, b.mask);
      EXPECT_EQ(a.pointmap.validity, b.pointmap.validity);
    }
  }
}

}  // namespace
}  // namespace steerkit
