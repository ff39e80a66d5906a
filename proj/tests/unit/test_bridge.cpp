// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "steerkit/bridge.hpp"
#include "steerkit/tensor_file.hpp"
#include "test_util.hpp"

namespace steerkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kMock = STEERKIT_TEST_MOCK_BRIDGE;

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("steerkit_bridge_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Fixture {
  std::shared_ptr<const GroundTruthScene> scene;
  FrameStack frames;
};

Fixture small_scene() {
  SceneSpec spec;
  spec.frames = 4;
  spec.static_points = 500;
  spec.width = spec.height = 16;
  spec.channels = 4;
  Fixture f{std::make_shared<const GroundTruthScene>(synth_scene(3, spec)), {}};
  f.frames = render_nominal(*f.scene, {0, 1, 2, 3});
  return f;
}

TEST(BridgeClient, HandshakeAndCleanExit) {
  const fs::path dir = fresh_dir("hs");
  BridgeClient c(kMock, dir);
  EXPECT_EQ(c.handshake().at("protocol"), kBridgeProtocol);
  EXPECT_EQ(c.handshake().at("version"), kBridgeProtocolVersion);
  EXPECT_EQ(c.close(), 0);
  fs::remove_all(dir);
}

TEST(BridgeClient, EchoRoundTripIsByteExact) {
  const fs::path dir = fresh_dir("echo");
  const Fixture fx = small_scene();
  json paths = json::array();
  for (std::size_t i = 0; i < fx.frames.size(); ++i) {
    const fs::path p = dir / ("in" + std::to_string(i) + ".f32t");
    write_tensor(p, to_tensor(fx.frames.frames[i]));
    paths.push_back(p.string());
  }
  const fs::path pose = dir / "pose.f32t";
  write_tensor(pose, to_tensor(fx.scene->nominal_poses[2]));
  paths.push_back(pose.string());
  BridgeClient c(kMock, dir);
  const json resp = c.request({{"id", 7},
                               {"mode", "echo"},
                               {"frames", paths},
                               {"frame_indices", {0, 1, 2, 3, 4}},
                               {"intrinsics", fx.scene->intrinsics.to_json()},
                               {"scratch", dir.string()}});
  EXPECT_EQ(resp.at("id"), 7);
  EXPECT_EQ(resp.at("status"), "ok");
  ASSERT_EQ(resp.at("echo").size(), paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    EXPECT_EQ(bytes_of(resp.at("echo")[i].get<std::string>()), bytes_of(paths[i].get<std::string>())) << i;
  }
  // A malformed request is answered with an error status; the bridge stays up.
  const json bad = c.request({{"id", 8}, {"mode", "3d"}});
  EXPECT_EQ(bad.at("id"), 8);
  EXPECT_EQ(bad.at("status").get<std::string>().rfind("error:", 0), 0u);
  EXPECT_EQ(c.close(), 0);
  fs::remove_all(dir);
}

TEST(BridgeReconstructor, ThreeAndFourDimensionalShapes) {
  const fs::path dir = fresh_dir("shapes");
  const Fixture fx = small_scene();
  const BridgeReconstructor r(kMock, dir);
  const SceneEstimate3D e3 = r.reconstruct_3d(fx.frames, fx.scene->intrinsics);
  ASSERT_EQ(e3.poses.size(), 4u);
  EXPECT_EQ(e3.gaussians.size(), 16u);
  EXPECT_EQ(e3.gaussians.channels, 4);
  EXPECT_NEAR(e3.poses[3].translation.x(), 0.03, 1e-7);
  const SceneEstimate4D e4 = r.reconstruct_4d(fx.frames, fx.scene->intrinsics);
  ASSERT_EQ(e4.pointmaps.size(), 4u);
  EXPECT_EQ(e4.pointmaps[0].height, 16);
  EXPECT_EQ(e4.masks[0].count(), 0u);
  // Request and response tensors are removed once consumed.
  EXPECT_TRUE(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST(BridgeReconstructor, DrivesSceneReward) {
  const Fixture fx = small_scene();
  const auto backend = std::make_shared<const SceneVideoBackend>(fx.scene);
  const auto bridge = std::make_shared<const BridgeReconstructor>(kMock);
  const SceneReward reward(backend, bridge, GeoRewardKind::gs, GeoRewardConfig{4});
  const double r = reward.evaluate(std::vector<double>(backend->dimension(), 0.0));
  EXPECT_TRUE(std::isfinite(r));
  EXPECT_GE(r, -1.0);
  EXPECT_LE(r, 1.0);
  EXPECT_EQ(reward.describe().at("reconstructor").at("type"), "bridge");
}

class BridgeFault : public ::testing::TestWithParam<std::pair<std::string, std::string>> {};

TEST_P(BridgeFault, RaisesProtocolError) {
  const auto [flags, mode] = GetParam();
  const Fixture fx = small_scene();
  const BridgeReconstructor r(kMock + " " + flags);
  if (mode == "3d") {
    EXPECT_ERROR_CODE(r.reconstruct_3d(fx.frames, fx.scene->intrinsics), ErrorCode::bridge_protocol);
  } else {
    EXPECT_ERROR_CODE(r.reconstruct_4d(fx.frames, fx.scene->intrinsics), ErrorCode::bridge_protocol);
  }
}

INSTANTIATE_TEST_SUITE_P(Faults, BridgeFault,
                         ::testing::Values(std::pair{std::string("--bad-handshake"), std::string("3d")},
                                           std::pair{std::string("--bad-version"), std::string("3d")},
                                           std::pair{std::string("--no-handshake"), std::string("3d")},
                                           std::pair{std::string("--error-status"), std::string("3d")},
                                           std::pair{std::string("--wrong-id"), std::string("3d")},
                                           std::pair{std::string("--garbage"), std::string("4d")},
                                           std::pair{std::string("--exit-after 0"), std::string("4d")},
                                           std::pair{std::string("--bad-shape"), std::string("4d")},
                                           std::pair{std::string("--missing-file"), std::string("3d")}));

TEST(BridgeReconstructor, MissingExecutable) {
  const Fixture fx = small_scene();
  const BridgeReconstructor r("/nonexistent/steerkit-bridge");
  EXPECT_ERROR_CODE(r.reconstruct_3d(fx.frames, fx.scene->intrinsics), ErrorCode::bridge_protocol);
  EXPECT_ERROR_CODE(BridgeReconstructor(""), ErrorCode::config);
}

}  // namespace
}  // namespace steerkit
