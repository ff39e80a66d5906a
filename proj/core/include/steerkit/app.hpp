// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "steerkit/config.hpp"
#include "steerkit/error.hpp"
#include "steerkit/rewards.hpp"

namespace steerkit {

inline constexpr const char* kTraceSchema = "steerkit-trace/1";
inline constexpr const char* kTraceCsvHeader = "step,particle,reward,weight,ess,ancestor";
inline constexpr const char* kScoreSchema = "steerkit-score/1";
inline constexpr const char* kScoreCsvHeader = "frame,score,eligible_pixels,raw_sum";

/// 0 ok, 2 config, 3 numeric, 4 bridge protocol.
int exit_code_for(ErrorCode code) noexcept;

/// Per-channel affine map from features to 8-bit pixels:
/// byte = clamp(round(scale * f + offset), 0, 255) for channels 0..2.
struct ImageMapping {
  double scale = 127.5;
  double offset = 127.5;
  nlohmann::json to_json() const;
};

void write_ppm(const std::filesystem::path& path, const FeatureMap& frame, const ImageMapping& mapping = {});

/// Writes manifest.json, trace.csv, sample.f32t (d), ensemble.f32t (k, d),
/// ensemble_rewards.f32t (k) and, for scene backends, frames/frame_NNNN.ppm.
SteerResult run_steer(const RunConfig& config, const std::filesystem::path& out);

void write_trace_csv(const std::filesystem::path& path, const SteerResult& result);

/// Scores frames against an estimate. `frames` holds frame_NNNN.f32t; the
/// estimate holds intrinsics.json and pose_NNNN.f32t plus gaussians.f32t
/// (gs_met3r) or pointmap_NNNN.f32t and mask_NNNN.f32t (dyn_met3r).
/// Writes score.csv and manifest.json to `out`.
GeoScore run_score(const RunConfig& config, const std::filesystem::path& frames, const std::filesystem::path& estimate,
                   const std::filesystem::path& out);

/// Evaluates the configured reward on a latent tensor. Writes score.json.
double run_score_sample(const RunConfig& config, const std::filesystem::path& sample, const std::filesystem::path& out);

/// Synthesises the configured scene and writes frames/ (tensors and PPM),
/// estimate3d/ and estimate4d/ from the η = 0 oracle, and manifest.json.
void run_scene(const RunConfig& config, const std::filesystem::path& out);

/// Frame tensors and intrinsics in the layout run_score reads.
void write_frame_stack(const std::filesystem::path& dir, const FrameStack& frames);
FrameStack read_frame_stack(const std::filesystem::path& dir);
void write_estimate_3d(const std::filesystem::path& dir, const SceneEstimate3D& est, const std::vector<int>& indices,
                       const Intrinsics& K);
void write_estimate_4d(const std::filesystem::path& dir, const SceneEstimate4D& est, const std::vector<int>& indices,
                       const Intrinsics& K);

}  // namespace steerkit
