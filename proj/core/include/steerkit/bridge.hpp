// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <mutex>
#include <string>

#include <json.hpp>

#include "steerkit/backends.hpp"

namespace steerkit {

inline constexpr const char* kBridgeProtocol = "steerkit-recon-bridge";
inline constexpr int kBridgeProtocolVersion = 1;

/// Line-delimited JSON over the child's stdin/stdout. The command runs under
/// /bin/sh with "--scratch <dir>" appended. The first line the child writes
/// must be the handshake {"protocol": ..., "version": 1}.
class BridgeClient {
 public:
  BridgeClient(const std::string& command, std::filesystem::path scratch);
  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  /// Sends one request line and returns the parsed response line.
  nlohmann::json request(const nlohmann::json& message);

  const std::filesystem::path& scratch() const noexcept { return scratch_; }
  const nlohmann::json& handshake() const noexcept { return handshake_; }

  /// Closes stdin and waits for the child. Returns its exit status.
  int close();

 private:
  std::string read_line();
  void write_line(const std::string& line);

  std::filesystem::path scratch_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  nlohmann::json handshake_;
};

/// Reconstructor backed by a bridge process. Requests are serialised, one in
/// flight at a time. Request and response tensors are deleted once consumed.
class BridgeReconstructor final : public Reconstructor {
 public:
  BridgeReconstructor(const std::string& command, std::filesystem::path scratch = {});
  ~BridgeReconstructor() override;

  SceneEstimate3D reconstruct_3d(const FrameStack& frames, const Intrinsics& K) const override;
  SceneEstimate4D reconstruct_4d(const FrameStack& frames, const Intrinsics& K) const override;
  nlohmann::json describe() const override;

 private:
  nlohmann::json send(const char* mode, const FrameStack& frames, const Intrinsics& K) const;
  /// Removes response tensors that live under the scratch directory.
  void discard_outputs(const nlohmann::json& resp) const;

  std::string command_;
  std::filesystem::path scratch_;
  bool owns_scratch_ = false;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<BridgeClient> client_;
  mutable long next_id_ = 0;
};

}  // namespace steerkit
