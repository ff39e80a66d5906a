// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>

#include "steerkit/tensor_file.hpp"
#include "steerkit/version.hpp"

namespace steerkit {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string indexed(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, i, ext);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::config, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::config, "cannot write " + path.string());
  return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::format, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, path.string() + ": " + e.what());
  }
}

/// Frame indices of files named <stem>_NNNN.f32t, ascending.
std::map<int, fs::path> indexed_files(const fs::path& dir, const std::string& stem) {
  if (!fs::is_directory(dir)) fail(ErrorCode::config, "not a directory: " + dir.string());
  const std::regex re(stem + "_([0-9]+)\\.f32t");
  std::map<int, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, re)) out[std::stoi(m[1].str())] = entry.path();
  }
  return out;
}

Tensor vector_tensor(const std::vector<double>& v) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.data.assign(v.begin(), v.end());
  return t;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::schedule_infeasible:
    case ErrorCode::format:
    case ErrorCode::config:
    case ErrorCode::unsupported:
      return 2;
    case ErrorCode::numeric:
    case ErrorCode::degenerate_weights:
    case ErrorCode::behind_camera:
    case ErrorCode::empty_support:
    case ErrorCode::reward_undefined:
      return 3;
    case ErrorCode::bridge_protocol:
      return 4;
  }
  return 3;
}

json ImageMapping::to_json() const {
  return {{"channels", {0, 1, 2}}, {"formula", "byte = clamp(round(scale * f + offset), 0, 255)"},
          {"scale", scale}, {"offset", offset}, {"format", "ppm-p6"}};
}

void write_ppm(const fs::path& path, const FeatureMap& frame, const ImageMapping& mapping) {
  std::ofstream f = open_out(path);
  f << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  std::vector<unsigned char> bytes(frame.pixels() * 3);
  for (std::size_t p = 0; p < frame.pixels(); ++p) {
    const double* px = frame.pixel(p);
    for (int c = 0; c < 3; ++c) {
      const double f_c = px[std::min(c, frame.channels() - 1)];
      const double b = std::clamp(std::round(mapping.scale * f_c + mapping.offset), 0.0, 255.0);
      bytes[p * 3 + c] = static_cast<unsigned char>(b);
    }
  }
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_trace_csv(const fs::path& path, const SteerResult& result) {
  std::ofstream f = open_out(path);
  f << kTraceCsvHeader << '\n';
  for (const StepTrace& t : result.traces) {
    for (std::size_t i = 0; i < t.rewards.size(); ++i) {
      f << t.step << ',' << i << ',' << num(t.rewards[i]) << ',' << num(t.weights[i]) << ',' << num(t.ess) << ','
        << t.ancestors[i] << '\n';
    }
  }
}

SteerResult run_steer(const RunConfig& config, const fs::path& out) {
  const auto ctx = build_context(config);
  SteerResult res = execute(config, *ctx, config.seed);
  ensure_dir(out);

  write_tensor(out / "sample.f32t", vector_tensor(res.selected));
  std::vector<std::vector<double>> states;
  for (const Particle& p : res.ensemble_final.particles) states.push_back(p.state);
  write_tensor(out / "ensemble.f32t", to_tensor(states));
  write_tensor(out / "ensemble_rewards.f32t", vector_tensor(res.final_rewards));
  write_trace_csv(out / "trace.csv", res);

  json manifest = res.manifest;
  manifest["trace_schema"] = kTraceSchema;
  manifest["selected_index"] = res.selected_index;
  manifest["selected_reward"] = res.selected_reward;
  manifest["outputs"] = {{"sample", "sample.f32t"},
                         {"ensemble", "ensemble.f32t"},
                         {"ensemble_rewards", "ensemble_rewards.f32t"},
                         {"trace", "trace.csv"}};
  if (ctx->scene_backend) {
    const ImageMapping mapping;
    ensure_dir(out / "frames");
    const FrameStack frames = scene_latent_decode(res.selected, ctx->scene_backend->scene(),
                                                  ctx->scene_backend->magnitudes());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      write_ppm(out / "frames" / indexed("frame", frames.indices[i], "ppm"), frames.frames[i], mapping);
    }
    manifest["image_mapping"] = mapping.to_json();
    manifest["outputs"]["frames"] = "frames";
  }
  write_json(out / "manifest.json", manifest);
  return res;
}

void write_frame_stack(const fs::path& dir, const FrameStack& frames) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    write_tensor(dir / indexed("frame", frames.indices[i], "f32t"), to_tensor(frames.frames[i]));
  }
}

FrameStack read_frame_stack(const fs::path& dir) {
  FrameStack s;
  for (const auto& [index, path] : indexed_files(dir, "frame")) {
    s.indices.push_back(index);
    s.frames.push_back(feature_map_from_tensor(read_tensor(path)));
  }
  if (s.size() == 0) fail(ErrorCode::config, "no frame_NNNN.f32t files in " + dir.string());
  return s;
}

void write_estimate_3d(const fs::path& dir, const SceneEstimate3D& est, const std::vector<int>& indices,
                       const Intrinsics& K) {
  require(est.poses.size() == indices.size(), ErrorCode::invalid_argument, "pose count differs from frame count");
  ensure_dir(dir);
  write_json(dir / "intrinsics.json", K.to_json());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    write_tensor(dir / indexed("pose", indices[i], "f32t"), to_tensor(est.poses[i]));
  }
  write_tensor(dir / "gaussians.f32t", to_tensor(est.gaussians));
}

void write_estimate_4d(const fs::path& dir, const SceneEstimate4D& est, const std::vector<int>& indices,
                       const Intrinsics& K) {
  require(est.poses.size() == indices.size() && est.pointmaps.size() == indices.size() &&
              est.masks.size() == indices.size(),
          ErrorCode::invalid_argument, "estimate sizes differ from frame count");
  ensure_dir(dir);
  write_json(dir / "intrinsics.json", K.to_json());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    write_tensor(dir / indexed("pose", indices[i], "f32t"), to_tensor(est.poses[i]));
    write_tensor(dir / indexed("pointmap", indices[i], "f32t"), to_tensor(est.pointmaps[i]));
    write_tensor(dir / indexed("mask", indices[i], "f32t"), to_tensor(est.masks[i]));
  }
}

namespace {

std::vector<CameraPose> read_poses(const fs::path& dir, const std::vector<int>& indices) {
  std::vector<CameraPose> poses;
  for (int i : indices) poses.push_back(pose_from_tensor(read_tensor(dir / indexed("pose", i, "f32t"))));
  return poses;
}

}  // namespace

GeoScore run_score(const RunConfig& config, const fs::path& frames_dir, const fs::path& estimate,
                   const fs::path& out) {
  const std::string& type = config.reward.type;
  if (type != "gs_met3r" && type != "dyn_met3r") {
    fail(ErrorCode::config, "score with --frames needs a gs_met3r or dyn_met3r reward, got " + type);
  }
  const FrameStack frames = read_frame_stack(frames_dir);
  const Intrinsics K = Intrinsics::from_json(read_json(estimate / "intrinsics.json"));
  GeoRewardConfig geo = config.reward.geo;
  geo.recon_frames = static_cast<int>(frames.size());

  GeoScore score;
  if (type == "gs_met3r") {
    SceneEstimate3D est;
    est.poses = read_poses(estimate, frames.indices);
    est.gaussians = gaussians_from_tensor(read_tensor(estimate / "gaussians.f32t"));
    score = gs_met3r(frames, geo, est, K);
  } else {
    SceneEstimate4D est;
    est.poses = read_poses(estimate, frames.indices);
    for (int i : frames.indices) {
      est.pointmaps.push_back(pointmap_from_tensor(read_tensor(estimate / indexed("pointmap", i, "f32t"))));
      est.masks.push_back(mask_from_tensor(read_tensor(estimate / indexed("mask", i, "f32t"))));
    }
    score = dyn_met3r(frames, geo, est, K);
  }

  ensure_dir(out);
  std::ofstream f = open_out(out / "score.csv");
  f << kScoreCsvHeader << '\n';
  for (const FrameScore& fs_ : score.frames) {
    f << fs_.frame << ',' << num(fs_.score) << ',' << fs_.eligible << ',' << num(fs_.raw_sum) << '\n';
  }
  write_json(out / "manifest.json", {{"tool", "steerkit"},
                                     {"version", kVersion},
                                     {"git", kGitStamp},
                                     {"command", "score"},
                                     {"score_schema", kScoreSchema},
                                     {"reward", type},
                                     {"score", score.score},
                                     {"zero_support", score.zero_support},
                                     {"frames", frames_dir.string()},
                                     {"estimate", estimate.string()},
                                     {"config", config.to_json()}});
  return score;
}

double run_score_sample(const RunConfig& config, const fs::path& sample, const fs::path& out) {
  const auto ctx = build_context(config);
  const Tensor t = read_tensor(sample);
  const std::vector<double> x(t.data.begin(), t.data.end());
  if (x.size() != ctx->reward->dimension()) {
    fail(ErrorCode::config, "sample has " + std::to_string(x.size()) + " values, reward expects " +
                                std::to_string(ctx->reward->dimension()));
  }
  const double r = ctx->reward->evaluate(x, EvalPhase::final);
  ensure_dir(out);
  write_json(out / "score.json", {{"tool", "steerkit"},
                                  {"version", kVersion},
                                  {"git", kGitStamp},
                                  {"command", "score"},
                                  {"sample", sample.string()},
                                  {"reward", ctx->reward->describe()},
                                  {"score", r},
                                  {"config", config.to_json()}});
  return r;
}

void run_scene(const RunConfig& config, const fs::path& out) {
  if (config.backend.type != "scene_video") fail(ErrorCode::config, "scene needs the scene_video backend");
  const GroundTruthScene scene = synth_scene(config.backend.scene_seed, config.backend.scene);
  std::vector<int> all(static_cast<std::size_t>(scene.frame_count()));
  for (int i = 0; i < scene.frame_count(); ++i) all[static_cast<std::size_t>(i)] = i;
  const FrameStack frames = render_nominal(scene, all);

  ensure_dir(out);
  write_frame_stack(out / "frames", frames);
  const ImageMapping mapping;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    write_ppm(out / "frames" / indexed("frame", frames.indices[i], "ppm"), frames.frames[i], mapping);
  }
  write_estimate_3d(out / "estimate3d", oracle_reconstruct_3d(frames, scene), all, scene.intrinsics);
  write_estimate_4d(out / "estimate4d", oracle_reconstruct_4d(frames, scene), all, scene.intrinsics);
  write_json(out / "manifest.json", {{"tool", "steerkit"},
                                     {"version", kVersion},
                                     {"git", kGitStamp},
                                     {"command", "scene"},
                                     {"scene", scene.spec.to_json()},
                                     {"scene_seed", scene.seed},
                                     {"static_points", scene.static_points.size()},
                                     {"dynamic_points", scene.dynamic_points.size()},
                                     {"intrinsics", scene.intrinsics.to_json()},
                                     {"image_mapping", mapping.to_json()},
                                     {"config", config.to_json()}});
}

}  // namespace steerkit
