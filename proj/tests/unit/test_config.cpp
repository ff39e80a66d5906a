// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "steerkit/config.hpp"
#include "test_util.hpp"

namespace steerkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kConfigDir = STEERKIT_TEST_CONFIG_DIR;

json minimal() {
  return json::parse(R"({
    "backend": {"type": "gmm", "components": [{"weight": 1.0, "mean": [0.0], "variance": [1.0]}]},
    "reward": {"type": "linear", "coefficients": [1.0]},
    "sampler": {"steps": 20},
    "steering": {"particles": 4, "M": 2, "mode": "early"}
  })");
}

TEST(Config, ShippedPresetsLoadAndBuild) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(kConfigDir)) {
    if (e.path().extension() != ".json") continue;
    ++n;
    SCOPED_TRACE(e.path().string());
    const RunConfig c = load_config(e.path());
    EXPECT_NO_THROW((void)build_context(c));
  }
  EXPECT_GE(n, 4u);
}

TEST(Config, RoundTripIsStable) {
  for (const auto& e : fs::directory_iterator(kConfigDir)) {
    const RunConfig c = load_config(e.path());
    const json once = c.to_json();
    EXPECT_EQ(RunConfig::from_json(once).to_json(), once) << e.path();
  }
}

TEST(Config, DefaultsFillOmittedSections) {
  const RunConfig c = RunConfig::from_json(minimal());
  EXPECT_EQ(c.sampler.type, "v_prediction");
  EXPECT_EQ(c.sampler.schedule, NoiseScheduleKind::cosine);
  EXPECT_EQ(c.steering.potential.lambda, 10.0);
  EXPECT_EQ(c.steering.potential.kind, PotentialKind::max);
  EXPECT_EQ(c.steering.method, "steer");
  EXPECT_TRUE(c.bridge.empty());
}

TEST(Config, RejectsUnknownKeysEverywhere) {
  const std::vector<std::vector<std::string>> paths = {{}, {"backend"}, {"reward"}, {"sampler"}, {"steering"}};
  for (const auto& path : paths) {
    json j = minimal();
    json* node = &j;
    for (const auto& p : path) node = &(*node)[p];
    (*node)["colour"] = 1;
    EXPECT_ERROR_CODE(RunConfig::from_json(j), ErrorCode::config);
  }
  json j = minimal();
  j["reward"]["perturbation"] = {{"eta", 0.1}, {"sd", 2}};
  EXPECT_ERROR_CODE(RunConfig::from_json(j), ErrorCode::config);
}

TEST(Config, RejectsInvalidValues) {
  const auto bad = [](auto edit) {
    json j = minimal();
    edit(j);
    SCOPED_TRACE(j.dump());
    EXPECT_ERROR_CODE(RunConfig::from_json(j), ErrorCode::config);
  };
  bad([](json& j) { j["steering"]["particles"] = 0; });
  bad([](json& j) { j["steering"]["lambda"] = -1.0; });
  bad([](json& j) { j["steering"]["mode"] = "middle"; });
  bad([](json& j) { j["steering"]["method"] = "beam"; });
  bad([](json& j) { j["steering"]["steps"] = {3, 2}; });
  bad([](json& j) { j["sampler"]["steps"] = 1; });
  bad([](json& j) { j["sampler"]["type"] = "ode"; });
  bad([](json& j) { j["sampler"]["schedule"] = "sqrt"; });
  bad([](json& j) { j["reward"] = {{"type", "gs_met3r"}}; });
  bad([](json& j) { j["reward"] = {{"type", "linear"}}; });
  bad([](json& j) { j["reward"]["perturbation"] = {{"eta", -0.1}}; });
  bad([](json& j) { j["backend"]["components"][0]["weight"] = 0.5; });
  bad([](json& j) { j["backend"]["type"] = "vae"; });
  bad([](json& j) { j["seed"] = "seven"; });
  bad([](json& j) { j.erase("reward"); });
  bad([](json& j) {
    j["backend"] = {{"type", "scene_video"}, {"scene", {{"frames", 6}}}};
    j["reward"] = {{"type", "gs_met3r"}, {"recon_frames", 8}};
  });
}

TEST(Config, BuildErrorsAreConfigErrors) {
  json j = minimal();
  j["sampler"]["steps"] = 10;
  j["steering"]["M"] = 4;  // early window [6, 8] holds 3 steps
  EXPECT_ERROR_CODE(build_context(RunConfig::from_json(j)), ErrorCode::config);
  j = minimal();
  j["reward"]["coefficients"] = {1.0, 2.0};
  EXPECT_ERROR_CODE(build_context(RunConfig::from_json(j)), ErrorCode::config);
  j = minimal();
  j["steering"]["mode"] = "custom";
  j["steering"]["steps"] = {5, 25};
  EXPECT_ERROR_CODE(build_context(RunConfig::from_json(j)), ErrorCode::config);
}

TEST(Config, ContextMatchesSpec) {
  json j = minimal();
  j["reward"]["perturbation"] = {{"eta", 0.1}, {"seed", 3}};
  const auto ctx = build_context(RunConfig::from_json(j));
  EXPECT_EQ(ctx->resampling.steering_steps, build_resampling_schedule(20, 2, ResamplingMode::early).steering_steps);
  EXPECT_EQ(ctx->process->steps(), 20);
  EXPECT_EQ(ctx->reward->describe().at("type"), "perturbed");
  j["steering"]["method"] = "best_of_n";
  EXPECT_TRUE(build_context(RunConfig::from_json(j))->resampling.steering_steps.empty());
  j["steering"]["method"] = "steer";
  j["steering"]["mode"] = "every";
  EXPECT_EQ(build_context(RunConfig::from_json(j))->resampling.size(), 20);
}

TEST(Config, ManifestReproducesConfig) {
  const RunConfig c = load_config(kConfigDir / "gmm_minimal.json");
  const auto ctx = build_context(c);
  const SteerResult r = execute(c, *ctx, 99);
  json manifest = r.manifest;
  EXPECT_EQ(manifest.at("config").at("seed"), 99);
  const fs::path tmp = fs::temp_directory_path() / "steerkit_test_manifest.json";
  std::ofstream(tmp) << manifest.dump(2);
  const RunConfig again = load_config(tmp);
  EXPECT_EQ(again.seed, 99u);
  const SteerResult r2 = execute(again, *build_context(again), again.seed);
  EXPECT_EQ(r2.selected, r.selected);
  fs::remove(tmp);
  EXPECT_ERROR_CODE(load_config(tmp), ErrorCode::config);
}

TEST(Config, MalformedFile) {
  const fs::path tmp = fs::temp_directory_path() / "steerkit_test_bad.json";
  std::ofstream(tmp) << "{ \"seed\": ";
  EXPECT_ERROR_CODE(load_config(tmp), ErrorCode::config);
  fs::remove(tmp);
}

}  // namespace
}  // namespace steerkit
