// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "steerkit/backends.hpp"
#include "steerkit/rewards.hpp"
#include "steerkit/scene.hpp"
#include "test_util.hpp"

namespace steerkit {
namespace {

std::vector<int> all_frames(const GroundTruthScene& s) {
  std::vector<int> v(static_cast<std::size_t>(s.frame_count()));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

SceneSpec small_spec(int frames = 8, bool dynamic = false) {
  SceneSpec spec;
  spec.frames = frames;
  spec.static_points = 8000;
  spec.trajectory_length = dynamic ? 0.5 : 0.0;
  return spec;
}

struct Scored {
  GroundTruthScene scene;
  FrameStack video;
  FrameStack selected;
};

Scored make(std::uint64_t seed, const SceneSpec& spec, const GeoRewardConfig& cfg) {
  Scored s{synth_scene(seed, spec), {}, {}};
  s.video = render_nominal(s.scene, all_frames(s.scene));
  s.selected = select_stack(s.video, cfg);
  return s;
}

// ---------------------------------------------------------------------------
// Scenes and oracles.

TEST(Scene, DeterministicAndSized) {
  const SceneSpec spec;
  const GroundTruthScene a = synth_scene(5, spec), b = synth_scene(5, spec);
  EXPECT_EQ(a.frame_count(), 25);
  EXPECT_EQ(a.static_points.positions, b.static_points.positions);
  EXPECT_EQ(a.static_points.features, b.static_points.features);
  EXPECT_EQ(a.dynamic_points.positions, b.dynamic_points.positions);
  for (int i = 0; i < 25; ++i) {
    EXPECT_EQ(a.nominal_poses[i].rotation, b.nominal_poses[i].rotation);
    EXPECT_EQ(a.nominal_poses[i].translation, b.nominal_poses[i].translation);
    EXPECT_TRUE(a.nominal_poses[i].is_valid());
  }
  EXPECT_NE(synth_scene(6, spec).static_points.features, a.static_points.features);
  EXPECT_TRUE(a.has_dynamic());
}

TEST(Scene, InvalidSpec) {
  SceneSpec spec;
  spec.static_points = 50;
  EXPECT_ERROR_CODE(synth_scene(0, spec), ErrorCode::invalid_argument);
  spec = SceneSpec{};
  spec.frames = 0;
  EXPECT_ERROR_CODE(synth_scene(0, spec), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(SceneSpec::from_json({{"frames", 3}, {"colour", 1}}), ErrorCode::config);
}

TEST(Scene, StaticOnlyHasEmptyMasks) {
  const GroundTruthScene s = synth_scene(2, small_spec(5, false));
  EXPECT_FALSE(s.has_dynamic());
  for (int i = 0; i < 5; ++i) EXPECT_EQ(render_scene(s, s.nominal_poses[i], i).mask.count(), 0u);
  const FrameStack f = render_nominal(s, {0, 2, 4});
  for (double eta : {0.0, 0.1, 1.0}) {
    const SceneEstimate4D e = oracle_reconstruct_4d(f, s, {eta, 3});
    for (const DynamicMask& m : e.masks) EXPECT_EQ(m.count(), 0u);
  }
}

TEST(Scene, RenderTimeChangesOnlyDynamicPixels) {
  const GroundTruthScene s = synth_scene(7, small_spec(9, true));
  const CameraPose& pose = s.nominal_poses[4];
  const SceneRender a = render_scene(s, pose, 1.0), b = render_scene(s, pose, 7.0);
  ASSERT_GT(a.mask.count(), 0u);
  std::size_t differing = 0;
  for (std::size_t p = 0; p < a.frame.pixels(); ++p) {
    const bool same = std::equal(a.frame.pixel(p), a.frame.pixel(p) + a.frame.channels(), b.frame.pixel(p));
    if (!same) {
      ++differing;
      EXPECT_TRUE(a.mask.values[p] || b.mask.values[p]) << "pixel " << p;
    }
  }
  EXPECT_GT(differing, 0u);
  EXPECT_ERROR_CODE(render_scene(s, pose, 8.5), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(render_scene(s, pose, -0.1), ErrorCode::invalid_argument);
}

TEST(Scene, PointmapReprojectsToOwnPixel) {
  const GroundTruthScene s = synth_scene(8, small_spec(5, true));
  for (int i = 0; i < 5; ++i) {
    const SceneRender r = render_scene(s, s.nominal_poses[i], i);
    std::size_t valid = 0;
    for (std::size_t p = 0; p < r.pointmap.points.size(); ++p) {
      if (!r.pointmap.validity.values[p]) continue;
      ++valid;
      const Projection pr = project(r.pointmap.points[p], s.nominal_poses[i], s.intrinsics);
      const double u = static_cast<double>(p % r.pointmap.width), v = static_cast<double>(p / r.pointmap.width);
      ASSERT_LE(std::abs(pr.u - u), 0.5);
      ASSERT_LE(std::abs(pr.v - v), 0.5);
    }
    EXPECT_GT(valid, r.pointmap.points.size() / 2);
  }
}

TEST(Oracle, ExactAtZeroNoise) {
  const GroundTruthScene s = synth_scene(9, small_spec(6, true));
  const FrameStack f = render_nominal(s, {1, 3, 5});
  const SceneEstimate3D e3 = oracle_reconstruct_3d(f, s);
  const SceneEstimate4D e4 = oracle_reconstruct_4d(f, s);
  ASSERT_EQ(e3.poses.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const CameraPose& n = s.nominal_poses[static_cast<std::size_t>(f.indices[i])];
    EXPECT_EQ(e3.poses[i].rotation, n.rotation);
    EXPECT_EQ(e3.poses[i].translation, n.translation);
    EXPECT_EQ(e4.poses[i].rotation, n.rotation);
    const SceneRender r = render_scene(s, n, f.indices[i]);
    EXPECT_TRUE(e4.masks[i] == r.mask);
  }
  for (const double o : e3.gaussians.opacities) EXPECT_EQ(o, 1.0);
  EXPECT_EQ(e3.gaussians.means, s.static_points.positions);
  // Masks are never perturbed.
  const SceneEstimate4D noisy = oracle_reconstruct_4d(f, s, {0.2, 1});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(noisy.masks[i] == e4.masks[i]);
  EXPECT_ERROR_CODE(oracle_reconstruct_3d(f, s, {-1.0, 0}), ErrorCode::invalid_argument);
}

// ---------------------------------------------------------------------------
// Cosine field and analytic rewards.

FeatureMap constant_map(int h, int w, std::vector<double> c) {
  FeatureMap m(h, w, static_cast<int>(c.size()));
  for (std::size_t p = 0; p < m.pixels(); ++p) std::copy(c.begin(), c.end(), m.pixel(p));
  return m;
}

TEST(Cosine, Examples) {
  FeatureMap a(4, 5, 3);
  CounterRng rng(1, 0, 0);
  for (double& v : a.data()) v = rng.normal() + 3.0;
  FeatureMap neg = a;
  for (double& v : neg.data()) v = -v;
  EXPECT_NEAR(cosine_field(a, a).mean, 1.0, 1e-15);
  EXPECT_NEAR(cosine_field(a, neg).mean, -1.0, 1e-15);
  EXPECT_EQ(cosine_field(a, a).eligible, 20u);
  EXPECT_NEAR(cosine_field(constant_map(3, 3, {1, 0}), constant_map(3, 3, {0, 2})).mean, 0.0, 1e-15);
  const FeatureMap zero(4, 5, 3);
  EXPECT_ERROR_CODE(cosine_field(a, zero), ErrorCode::empty_support);
  EXPECT_ERROR_CODE(cosine_field(a, FeatureMap(4, 4, 3)), ErrorCode::invalid_argument);
}

TEST(Cosine, MaskAndCoverageRestrictSupport) {
  FeatureMap a = constant_map(2, 2, {1, 0}), b = constant_map(2, 2, {1, 0});
  b.pixel(0)[0] = -1.0;
  BinaryMap mask(2, 2), cov(2, 2, 1);
  mask.values[0] = 1;
  const CosineResult masked = cosine_field(a, b, &mask, &cov);
  EXPECT_EQ(masked.eligible, 3u);
  EXPECT_EQ(masked.mean, 1.0);
  cov.values[1] = 0;
  const CosineResult both = cosine_field(a, b, nullptr, &cov);
  EXPECT_EQ(both.eligible, 3u);
  EXPECT_NEAR(both.mean, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(both.raw_sum, 1.0, 1e-15);
}

TEST(AnalyticRewards, Examples) {
  EXPECT_EQ(linear_reward({1.0})->evaluate(std::vector<double>{0.5}), 0.5);
  EXPECT_EQ(linear_reward({1.0, -1.0})->evaluate(std::vector<double>{2.0, 2.0}), 0.0);
  EXPECT_EQ(quadratic_reward({0.0}, 1.0)->evaluate(std::vector<double>{0.0}), 0.0);
  EXPECT_EQ(quadratic_reward({1.0, 2.0}, 0.5)->evaluate(std::vector<double>{0.0, 0.0}), -2.5);
  EXPECT_ERROR_CODE(linear_reward({1.0})->evaluate(std::vector<double>{1.0, 2.0}), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(quadratic_reward({0.0}, 1.0)->evaluate(std::vector<double>{}), ErrorCode::invalid_argument);
}

TEST(PerturbedReward, BoundedDeterministicAndExactAtFinal) {
  const auto base = linear_reward({1.0, 2.0});
  const auto p = perturbed_reward(base, 0.05, 17);
  const auto same = perturbed_reward(base, 0.05, 17);
  const auto zero = perturbed_reward(base, 0.0, 17);
  CounterRng rng(3, 0, 0);
  double max_dev = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const std::vector<double> x{5 * rng.normal(), rng.normal()};
    const double b = base->evaluate(x);
    const double r = p->evaluate(x, EvalPhase::intermediate);
    ASSERT_LE(std::abs(r - b), 0.05);
    max_dev = std::max(max_dev, std::abs(r - b));
    ASSERT_EQ(r, same->evaluate(x, EvalPhase::intermediate));
    ASSERT_EQ(p->evaluate(x, EvalPhase::final), b);
    ASSERT_EQ(zero->evaluate(x, EvalPhase::intermediate), b);
  }
  EXPECT_GT(max_dev, 0.04);
  EXPECT_NE(perturbed_reward(base, 0.05, 18)->evaluate(std::vector<double>{1, 1}, EvalPhase::intermediate),
            p->evaluate(std::vector<double>{1, 1}, EvalPhase::intermediate));
  EXPECT_ERROR_CODE(perturbed_reward(base, -0.1, 0), ErrorCode::invalid_argument);
}

// ---------------------------------------------------------------------------
// Frame selection and geometric scores.

TEST(FrameSelection, EvenlySpacedWithEndpoints) {
  EXPECT_EQ(select_frames(25, 8), (std::vector<int>{0, 3, 7, 10, 14, 17, 21, 24}));
  EXPECT_EQ(select_frames(8, 8), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(select_frames(5, 1), (std::vector<int>{0}));
  for (int N = 2; N <= 60; ++N) {
    for (int n = 2; n <= N; ++n) {
      const auto s = select_frames(N, n);
      ASSERT_EQ(static_cast<int>(s.size()), n);
      ASSERT_EQ(s.front(), 0);
      ASSERT_EQ(s.back(), N - 1);
      for (std::size_t i = 1; i < s.size(); ++i) ASSERT_GT(s[i], s[i - 1]);
    }
  }
  EXPECT_ERROR_CODE(select_frames(4, 5), ErrorCode::invalid_argument);
}

TEST(FrameSelection, SplitAlternates) {
  const FrameSplit s8 = split_frames(8);
  EXPECT_EQ(s8.src, (std::vector<int>{0, 2, 4, 6}));
  EXPECT_EQ(s8.tgt, (std::vector<int>{1, 3, 5, 7}));
  for (int n = 1; n <= 30; ++n) {
    const FrameSplit s = split_frames(n);
    EXPECT_EQ(static_cast<int>(s.src.size()), (n + 1) / 2);
    std::vector<int> all = s.src;
    all.insert(all.end(), s.tgt.begin(), s.tgt.end());
    std::sort(all.begin(), all.end());
    std::vector<int> want(static_cast<std::size_t>(n));
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(all, want);
  }
}

TEST(GsMet3r, OracleScoresNearOneOnSelectedFrames) {
  // Default scene density: the score floor is a property of the full scene.
  const GeoRewardConfig cfg{8};
  SceneSpec spec;
  spec.trajectory_length = 0.0;
  const Scored s = make(21, spec, cfg);
  const GeoScore g = gs_met3r(s.video, cfg, oracle_reconstruct_3d(s.selected, s.scene), s.scene.intrinsics);
  EXPECT_GE(g.score, 0.99);
  EXPECT_FALSE(g.zero_support);
  ASSERT_EQ(g.frames.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(g.frames[i].frame, select_frames(25, 8)[i]);
  EXPECT_ERROR_CODE(gs_met3r(s.video, cfg, oracle_reconstruct_3d(render_nominal(s.scene, {0}), s.scene), s.scene.intrinsics),
                    ErrorCode::invalid_argument);
}

TEST(GsMet3r, RandomPosesAndLargeNoiseScoreLower) {
  const GeoRewardConfig cfg{4};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scored s = make(seed, small_spec(8), cfg);
    const double exact = gs_met3r(s.video, cfg, oracle_reconstruct_3d(s.selected, s.scene), s.scene.intrinsics).score;
    SceneEstimate3D random = oracle_reconstruct_3d(s.selected, s.scene);
    CounterRng rng(seed, 1, 0);
    for (CameraPose& p : random.poses) {
      const Vec3 eye(rng.normal(), rng.normal(), rng.normal());
      const Vec3 target(rng.normal(), rng.normal(), rng.normal());
      p = look_at(eye * 2.0, target);
    }
    EXPECT_LT(gs_met3r(s.video, cfg, random, s.scene.intrinsics).score, exact) << seed;
    const SceneEstimate3D noisy = oracle_reconstruct_3d(s.selected, s.scene, {3.0, seed});
    EXPECT_LT(gs_met3r(s.video, cfg, noisy, s.scene.intrinsics).score, exact) << seed;
  }
}

TEST(GsMet3r, ZeroRenderGivesFlaggedZero) {
  GeoRewardConfig cfg{3};
  const Scored s = make(4, small_spec(5), cfg);
  SceneEstimate3D e = oracle_reconstruct_3d(s.selected, s.scene);
  std::fill(e.gaussians.colors.begin(), e.gaussians.colors.end(), 0.0);
  const GeoScore g = gs_met3r(s.video, cfg, e, s.scene.intrinsics);
  EXPECT_TRUE(g.zero_support);
  EXPECT_EQ(g.score, 0.0);
  cfg.strict = true;
  EXPECT_ERROR_CODE(gs_met3r(s.video, cfg, e, s.scene.intrinsics), ErrorCode::reward_undefined);
}

TEST(DynMet3r, OracleScoresNearOne) {
  const GeoRewardConfig cfg{8};
  for (bool dynamic : {false, true}) {
    const Scored s = make(31, small_spec(25, dynamic), cfg);
    const GeoScore g = dyn_met3r(s.video, cfg, oracle_reconstruct_4d(s.selected, s.scene), s.scene.intrinsics);
    EXPECT_GE(g.score, 0.99) << dynamic;
    ASSERT_EQ(g.frames.size(), 4u);
    const FrameSplit split = split_frames(8);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g.frames[i].frame, s.selected.indices[split.tgt[i]]);
  }
}

TEST(DynMet3r, BlindToMaskedPixels) {
  const GeoRewardConfig cfg{8};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scored s = make(seed, small_spec(12, true), cfg);
    const SceneEstimate4D e = oracle_reconstruct_4d(s.selected, s.scene, {0.01, seed});
    const GeoScore ref = dyn_met3r(s.video, cfg, e, s.scene.intrinsics);
    FrameStack edited = s.video;
    CounterRng rng(seed, 2, 0);
    std::size_t touched = 0;
    for (std::size_t i = 0; i < s.selected.size(); ++i) {
      FeatureMap& f = edited.frames[static_cast<std::size_t>(s.selected.indices[i])];
      for (std::size_t p = 0; p < f.pixels(); ++p) {
        if (!e.masks[i].values[p]) continue;
        ++touched;
        for (int c = 0; c < f.channels(); ++c) f.pixel(p)[c] = 10 * rng.normal();
      }
    }
    ASSERT_GT(touched, 0u);
    const GeoScore after = dyn_met3r(edited, cfg, e, s.scene.intrinsics);
    EXPECT_NEAR(after.score, ref.score, 1e-12);
    EXPECT_EQ(after.score, ref.score);
  }
}

TEST(DynMet3r, AllDynamicMasksGiveFlaggedZero) {
  GeoRewardConfig cfg{6};
  const Scored s = make(5, small_spec(6, true), cfg);
  SceneEstimate4D e = oracle_reconstruct_4d(s.selected, s.scene);
  for (DynamicMask& m : e.masks) std::fill(m.values.begin(), m.values.end(), 1);
  const GeoScore g = dyn_met3r(s.video, cfg, e, s.scene.intrinsics);
  EXPECT_TRUE(g.zero_support);
  EXPECT_EQ(g.score, 0.0);
  cfg.strict = true;
  EXPECT_ERROR_CODE(dyn_met3r(s.video, cfg, e, s.scene.intrinsics), ErrorCode::reward_undefined);
}

TEST(GeoScores, StayInRangeOverRandomScenes) {
  SceneSpec spec;
  spec.frames = 4;
  spec.static_points = 300;
  spec.width = spec.height = 16;
  spec.channels = 4;
  spec.dynamic_points = 100;
  const GeoRewardConfig cfg{4};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CounterRng rng(seed, 3, 0);
    spec.trajectory_length = rng.uniform() < 0.5 ? 0.0 : 0.5;
    const Scored s = make(seed, spec, cfg);
    const double eta = 2.0 * rng.uniform();
    const GeoScore gs = gs_met3r(s.video, cfg, oracle_reconstruct_3d(s.selected, s.scene, {eta, seed}), s.scene.intrinsics);
    const GeoScore dyn = dyn_met3r(s.video, cfg, oracle_reconstruct_4d(s.selected, s.scene, {eta, seed}), s.scene.intrinsics);
    for (const GeoScore* g : {&gs, &dyn}) {
      ASSERT_TRUE(std::isfinite(g->score));
      ASSERT_GE(g->score, -1.0 - 1e-12) << seed;
      ASSERT_LE(g->score, 1.0 + 1e-12) << seed;
    }
  }
}

TEST(SceneReward, DecodesOnlySelectedFrames) {
  SceneSpec spec = small_spec(10, true);
  const auto scene = std::make_shared<const GroundTruthScene>(synth_scene(12, spec));
  const auto backend = std::make_shared<const SceneVideoBackend>(scene);
  const auto recon = std::make_shared<const OracleReconstructor>(scene);
  const SceneReward gs(backend, recon, GeoRewardKind::gs, GeoRewardConfig{4});
  const SceneReward dyn(backend, recon, GeoRewardKind::dyn, GeoRewardConfig{4});
  const std::vector<double> zero(backend->dimension(), 0.0);
  const GeoScore g = gs.score(zero);
  ASSERT_EQ(g.frames.size(), 4u);
  EXPECT_EQ(g.frames.back().frame, 9);
  EXPECT_GE(dyn.evaluate(zero), 0.99);
  // Perturbing an unselected frame leaves the reward unchanged.
  std::vector<double> latent = zero;
  latent[1 * (6 + 16) + 3] = 2.0;
  EXPECT_EQ(gs.evaluate(latent), gs.evaluate(zero));
  EXPECT_EQ(gs.describe().at("selected_frames"), nlohmann::json({0, 3, 6, 9}));
}

}  // namespace
}  // namespace steerkit
