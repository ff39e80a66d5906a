// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "steerkit/backends.hpp"
#include "steerkit/rewards.hpp"
#include "steerkit/rng.hpp"
#include "steerkit/schedule.hpp"
#include "steerkit/steering.hpp"

namespace {

using namespace steerkit;

const GmmBackend& gmm() {
  static const GmmBackend b(GaussianMixtureModel({{0.5, {-1.5, 0.0}, {0.25, 0.25}}, {0.5, {1.5, 0.0}, {0.25, 0.25}}}));
  return b;
}

// Whole steering run per iteration; range(0) = particles.
void BM_SteerGmm(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const TimestepSchedule sched = build_alpha_bar_schedule(100, NoiseScheduleKind::cosine);
  const ResamplingSchedule every = ResamplingSchedule::every_step(100);
  const auto reward = linear_reward({1.0, 0.0});
  const PotentialConfig pot{0.5, PotentialKind::difference, TerminalMode::resample};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(steer_v_prediction(gmm(), *reward, sched, every, pot, k, seed++).selected_reward);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(k) * 100);
}
BENCHMARK(BM_SteerGmm)->RangeMultiplier(4)->Range(1, 256);

void BM_MultinomialResample(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  ParticleEnsemble e;
  std::vector<double> w(k);
  CounterRng init(1, 0, 0);
  for (std::size_t i = 0; i < k; ++i) {
    e.particles.push_back(Particle{{init.normal()}, {}, 0.0, 0.0, i});
    w[i] = init.uniform();
  }
  std::uint64_t t = 0;
  for (auto _ : state) {
    CounterRng rng(7, kResampleStream, t++);
    benchmark::DoNotOptimize(multinomial_resample(e, w, rng).ensemble.k());
  }
}
BENCHMARK(BM_MultinomialResample)->RangeMultiplier(8)->Range(8, 4096);

}  // namespace
