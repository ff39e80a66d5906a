// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <numeric>

#include <benchmark/benchmark.h>

#include "steerkit/rewards.hpp"
#include "steerkit/scene.hpp"

namespace {

using namespace steerkit;

const GroundTruthScene& scene() {
  static const GroundTruthScene s = [] {
    SceneSpec spec;
    spec.trajectory_length = 0.0;
    return synth_scene(3, spec);
  }();
  return s;
}

void BM_RenderScene(benchmark::State& state) {
  const GroundTruthScene& s = scene();
  for (auto _ : state) benchmark::DoNotOptimize(render_scene(s, s.nominal_poses[0], 0.0));
}
BENCHMARK(BM_RenderScene);

void BM_RenderGaussians(benchmark::State& state) {
  const GroundTruthScene& s = scene();
  const FrameStack f = render_nominal(s, {0, 12});
  const SceneEstimate3D e = oracle_reconstruct_3d(f, s);
  for (auto _ : state) benchmark::DoNotOptimize(render_gaussians(e.gaussians, e.poses[1], s.intrinsics));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(e.gaussians.size()));
}
BENCHMARK(BM_RenderGaussians);

void BM_GsMet3r(benchmark::State& state) {
  const GroundTruthScene& s = scene();
  std::vector<int> all(static_cast<std::size_t>(s.frame_count()));
  std::iota(all.begin(), all.end(), 0);
  const FrameStack video = render_nominal(s, all);
  const GeoRewardConfig cfg{static_cast<int>(state.range(0))};
  const SceneEstimate3D e = oracle_reconstruct_3d(select_stack(video, cfg), s);
  for (auto _ : state) benchmark::DoNotOptimize(gs_met3r(video, cfg, e, s.intrinsics).score);
}
BENCHMARK(BM_GsMet3r)->Arg(4)->Arg(8);

}  // namespace
