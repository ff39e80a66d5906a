// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/config.hpp"

#include <fstream>
#include <set>

#include "steerkit/bridge.hpp"
#include "steerkit/error.hpp"

namespace steerkit {
namespace {

using nlohmann::json;

void allow_keys(const json& j, const char* where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(ErrorCode::config, std::string(where) + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail(ErrorCode::config, std::string("unknown field '") + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json backend_json(const BackendSpec& b) {
  if (b.type == "gmm") {
    json j = b.gmm ? b.gmm->to_json() : json::object();
    j["type"] = "gmm";
    return j;
  }
  return {{"type", b.type}, {"scene", b.scene.to_json()}, {"scene_seed", b.scene_seed}, {"magnitudes", b.magnitudes.to_json()}};
}

json reward_json(const RewardSpec& r) {
  json j = {{"type", r.type}};
  if (r.type == "linear") j["coefficients"] = r.coefficients;
  if (r.type == "quadratic") {
    j["center"] = r.center;
    j["scale"] = r.scale;
  }
  if (r.type == "gs_met3r" || r.type == "dyn_met3r") {
    j["recon_frames"] = r.geo.recon_frames;
    j["strict"] = r.geo.strict;
    j["oracle_noise"] = r.oracle_noise;
    j["oracle_seed"] = r.oracle_seed;
  }
  j["perturbation"] = {{"eta", r.perturb_eta}, {"seed", r.perturb_seed}};
  return j;
}

}  // namespace

json RunConfig::to_json() const {
  json steer = {{"method", steering.method},     {"particles", steering.particles},
                {"lambda", steering.potential.lambda}, {"potential", to_string(steering.potential.kind)},
                {"terminal", to_string(steering.potential.terminal)},
                {"M", steering.M},               {"mode", to_string(steering.mode)}};
  if (steering.mode == ResamplingMode::custom) steer["steps"] = steering.custom_steps;
  return {{"seed", seed},
          {"output", output},
          {"bridge", bridge},
          {"backend", backend_json(backend)},
          {"reward", reward_json(reward)},
          {"sampler",
           {{"type", sampler.type}, {"steps", sampler.steps}, {"schedule", to_string(sampler.schedule)},
            {"kernel", to_string(sampler.kernel)}}},
          {"steering", steer},
          {"bench", bench}};
}

RunConfig RunConfig::from_json(const json& j) {
  try {
    RunConfig c;
    allow_keys(j, "config", {"seed", "output", "bridge", "backend", "reward", "sampler", "steering", "bench"});
    read(j, "seed", c.seed);
    read(j, "output", c.output);
    read(j, "bridge", c.bridge);
    if (j.contains("bench")) {
      c.bench = j.at("bench");
      if (!c.bench.is_object()) fail(ErrorCode::config, "bench must be an object");
    }

    if (!j.contains("backend")) fail(ErrorCode::config, "missing 'backend'");
    const json& b = j.at("backend");
    if (!b.is_object()) fail(ErrorCode::config, "backend must be an object");
    c.backend.type = b.value("type", "gmm");
    if (c.backend.type == "gmm") {
      allow_keys(b, "backend", {"type", "components"});
      c.backend.gmm = GaussianMixtureModel::from_json(b);
    } else if (c.backend.type == "scene_video") {
      allow_keys(b, "backend", {"type", "scene", "scene_seed", "magnitudes"});
      if (b.contains("scene")) c.backend.scene = SceneSpec::from_json(b.at("scene"));
      read(b, "scene_seed", c.backend.scene_seed);
      if (b.contains("magnitudes")) c.backend.magnitudes = LatentMagnitudes::from_json(b.at("magnitudes"));
    } else {
      fail(ErrorCode::config, "unknown backend type '" + c.backend.type + "'");
    }

    if (!j.contains("reward")) fail(ErrorCode::config, "missing 'reward'");
    const json& r = j.at("reward");
    if (!r.is_object()) fail(ErrorCode::config, "reward must be an object");
    c.reward.type = r.value("type", "");
    if (c.reward.type == "linear") {
      allow_keys(r, "reward", {"type", "coefficients", "perturbation"});
      read(r, "coefficients", c.reward.coefficients);
      if (c.reward.coefficients.empty()) fail(ErrorCode::config, "linear reward needs coefficients");
    } else if (c.reward.type == "quadratic") {
      allow_keys(r, "reward", {"type", "center", "scale", "perturbation"});
      read(r, "center", c.reward.center);
      read(r, "scale", c.reward.scale);
      if (c.reward.center.empty()) fail(ErrorCode::config, "quadratic reward needs a center");
    } else if (c.reward.type == "gs_met3r" || c.reward.type == "dyn_met3r") {
      allow_keys(r, "reward", {"type", "recon_frames", "strict", "oracle_noise", "oracle_seed", "perturbation"});
      read(r, "recon_frames", c.reward.geo.recon_frames);
      read(r, "strict", c.reward.geo.strict);
      read(r, "oracle_noise", c.reward.oracle_noise);
      read(r, "oracle_seed", c.reward.oracle_seed);
      if (c.reward.oracle_noise < 0) fail(ErrorCode::config, "oracle_noise must be >= 0");
      if (c.backend.type != "scene_video") fail(ErrorCode::config, c.reward.type + " needs the scene_video backend");
      if (c.reward.geo.recon_frames < 2 || c.reward.geo.recon_frames > c.backend.scene.frames) {
        fail(ErrorCode::config, "recon_frames must lie in [2, scene frames]");
      }
    } else {
      fail(ErrorCode::config, "unknown reward type '" + c.reward.type + "'");
    }
    if (r.contains("perturbation")) {
      const json& p = r.at("perturbation");
      allow_keys(p, "reward.perturbation", {"eta", "seed"});
      read(p, "eta", c.reward.perturb_eta);
      read(p, "seed", c.reward.perturb_seed);
      if (c.reward.perturb_eta < 0) fail(ErrorCode::config, "perturbation eta must be >= 0");
    }

    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      allow_keys(s, "sampler", {"type", "steps", "schedule", "kernel"});
      read(s, "type", c.sampler.type);
      read(s, "steps", c.sampler.steps);
      if (s.contains("schedule")) c.sampler.schedule = parse_noise_schedule_kind(s.at("schedule").get<std::string>());
      if (s.contains("kernel")) c.sampler.kernel = parse_proposal_kernel(s.at("kernel").get<std::string>());
    }
    if (c.sampler.type != "v_prediction" && c.sampler.type != "rectified_flow") {
      fail(ErrorCode::config, "unknown sampler type '" + c.sampler.type + "'");
    }
    if (c.sampler.steps < (c.sampler.type == "v_prediction" ? 2 : 1)) fail(ErrorCode::config, "sampler steps too small");

    if (j.contains("steering")) {
      const json& s = j.at("steering");
      allow_keys(s, "steering", {"method", "particles", "lambda", "potential", "terminal", "M", "mode", "steps"});
      read(s, "method", c.steering.method);
      read(s, "particles", c.steering.particles);
      read(s, "lambda", c.steering.potential.lambda);
      if (s.contains("potential")) c.steering.potential.kind = parse_potential_kind(s.at("potential").get<std::string>());
      if (s.contains("terminal")) c.steering.potential.terminal = parse_terminal_mode(s.at("terminal").get<std::string>());
      read(s, "M", c.steering.M);
      if (s.contains("mode")) c.steering.mode = parse_resampling_mode(s.at("mode").get<std::string>());
      read(s, "steps", c.steering.custom_steps);
      if (c.steering.mode != ResamplingMode::custom && s.contains("steps")) {
        fail(ErrorCode::config, "'steps' is only valid with mode 'custom'");
      }
    }
    if (c.steering.method != "steer" && c.steering.method != "best_of_n") {
      fail(ErrorCode::config, "unknown steering method '" + c.steering.method + "'");
    }
    if (c.steering.particles < 1) fail(ErrorCode::config, "particles must be >= 1");
    if (!(c.steering.potential.lambda >= 0)) fail(ErrorCode::config, "lambda must be >= 0");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    throw Error(ErrorCode::config, e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::config, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorCode::config, path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.value("tool", "") == "steerkit") return RunConfig::from_json(j.at("config"));
  return RunConfig::from_json(j);
}

const VelocityModel& RunContext::velocity_model() const {
  if (gmm) return *gmm;
  return *scene_backend;
}

const FlowModel& RunContext::flow_model() const {
  if (gmm) return *gmm;
  return *scene_backend;
}

std::unique_ptr<RunContext> build_context(const RunConfig& config) {
  auto ctx = std::make_unique<RunContext>();
  try {
    std::size_t dim = 0;
    if (config.backend.type == "gmm") {
      ctx->gmm = std::make_shared<GmmBackend>(*config.backend.gmm);
      dim = ctx->gmm->dimension();
    } else {
      ctx->scene = std::make_shared<GroundTruthScene>(synth_scene(config.backend.scene_seed, config.backend.scene));
      ctx->scene_backend = std::make_shared<SceneVideoBackend>(ctx->scene, config.backend.magnitudes);
      dim = ctx->scene_backend->dimension();
    }

    const RewardSpec& r = config.reward;
    std::shared_ptr<const RewardFn> reward;
    if (r.type == "linear") {
      require(r.coefficients.size() == dim, ErrorCode::config, "linear reward dimension differs from backend");
      reward = linear_reward(r.coefficients);
    } else if (r.type == "quadratic") {
      require(r.center.size() == dim, ErrorCode::config, "quadratic reward dimension differs from backend");
      reward = quadratic_reward(r.center, r.scale);
    } else {
      if (!config.bridge.empty()) {
        ctx->reconstructor = std::make_shared<BridgeReconstructor>(config.bridge);
      } else {
        ctx->reconstructor = std::make_shared<OracleReconstructor>(ctx->scene, OracleOptions{r.oracle_noise, r.oracle_seed});
      }
      reward = std::make_shared<SceneReward>(ctx->scene_backend, ctx->reconstructor,
                                             r.type == "gs_met3r" ? GeoRewardKind::gs : GeoRewardKind::dyn, r.geo);
    }
    if (r.perturb_eta > 0) reward = perturbed_reward(reward, r.perturb_eta, r.perturb_seed);
    ctx->reward = reward;

    const int T = config.sampler.steps;
    if (config.sampler.type == "v_prediction") {
      ctx->schedule = build_alpha_bar_schedule(T, config.sampler.schedule);
      ctx->process = std::make_unique<VPredictionProcess>(ctx->velocity_model(), *ctx->schedule, config.sampler.kernel);
    } else {
      ctx->grid = build_flow_grid(T);
      ctx->process = std::make_unique<FlowProcess>(ctx->flow_model(), *ctx->grid, true);
    }

    const SteeringSpec& s = config.steering;
    if (s.method == "best_of_n") {
      ctx->resampling = ResamplingSchedule::none(T);
    } else if (s.mode == ResamplingMode::every) {
      ctx->resampling = ResamplingSchedule::every_step(T);
    } else if (s.mode == ResamplingMode::custom) {
      ctx->resampling = ResamplingSchedule::custom_steps(T, s.custom_steps);
    } else {
      ctx->resampling = build_resampling_schedule(T, s.M, s.mode);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_argument || e.code() == ErrorCode::schedule_infeasible) {
      throw Error(ErrorCode::config, e.what());
    }
    throw;
  }
  return ctx;
}

SteerResult execute(const RunConfig& config, const RunContext& ctx, std::uint64_t seed) {
  SteerResult res = config.steering.method == "best_of_n"
                        ? best_of_n(*ctx.process, *ctx.reward, config.steering.particles, seed)
                        : steer_process(*ctx.process, *ctx.reward, ctx.resampling, config.steering.potential,
                                        config.steering.particles, seed);
  RunConfig snapshot = config;
  snapshot.seed = seed;
  res.manifest["config"] = snapshot.to_json();
  return res;
}

}  // namespace steerkit
