// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerkit/backends.hpp"
#include "steerkit/scene.hpp"
#include "steerkit/schedule.hpp"
#include "steerkit/steering.hpp"

namespace steerkit {

struct BackendSpec {
  std::string type = "gmm";  // gmm | scene_video
  std::optional<GaussianMixtureModel> gmm;
  SceneSpec scene;
  std::uint64_t scene_seed = 0;
  LatentMagnitudes magnitudes;
};

struct RewardSpec {
  std::string type = "linear";  // linear | quadratic | gs_met3r | dyn_met3r
  std::vector<double> coefficients;
  std::vector<double> center;
  double scale = 1.0;
  GeoRewardConfig geo;
  double oracle_noise = 0.0;
  std::uint64_t oracle_seed = 0x0AC1E;
  double perturb_eta = 0.0;
  std::uint64_t perturb_seed = 0;
};

struct SamplerSpec {
  std::string type = "v_prediction";  // v_prediction | rectified_flow
  int steps = 50;
  NoiseScheduleKind schedule = NoiseScheduleKind::cosine;
  ProposalKernel kernel = ProposalKernel::ancestral;
};

struct SteeringSpec {
  std::string method = "steer";  // steer | best_of_n
  std::size_t particles = 4;
  PotentialConfig potential;
  int M = 4;
  ResamplingMode mode = ResamplingMode::early;
  std::vector<int> custom_steps;
};

/// Whole-run configuration. from_json validates every field and rejects
/// unknown keys before anything is computed.
struct RunConfig {
  BackendSpec backend;
  RewardSpec reward;
  SamplerSpec sampler;
  SteeringSpec steering;
  std::uint64_t seed = 0;
  std::string output = "steerkit-out";
  std::string bridge;
  nlohmann::json bench = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// Reads a config file. A run manifest is accepted too; its embedded config is used.
RunConfig load_config(const std::filesystem::path& path);

/// Objects built from a config and shared by the drivers.
struct RunContext {
  std::shared_ptr<const GmmBackend> gmm;
  std::shared_ptr<const GroundTruthScene> scene;
  std::shared_ptr<const SceneVideoBackend> scene_backend;
  std::shared_ptr<const Reconstructor> reconstructor;
  std::shared_ptr<const RewardFn> reward;
  std::optional<TimestepSchedule> schedule;
  std::optional<FlowTimeGrid> grid;
  ResamplingSchedule resampling;
  std::unique_ptr<ReverseProcess> process;

  const VelocityModel& velocity_model() const;
  const FlowModel& flow_model() const;
};

/// Builds every object a run needs. invalid-argument and schedule errors are
/// reported as config errors.
std::unique_ptr<RunContext> build_context(const RunConfig& config);

/// Runs the configured sampler (steering or best-of-N) with `seed`.
SteerResult execute(const RunConfig& config, const RunContext& ctx, std::uint64_t seed);

}  // namespace steerkit
