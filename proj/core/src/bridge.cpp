// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/bridge.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "steerkit/error.hpp"
#include "steerkit/tensor_file.hpp"

namespace steerkit {
namespace {

[[noreturn]] void protocol_error(const std::string& msg) { fail(ErrorCode::bridge_protocol, msg); }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::filesystem::path make_temp_dir() {
  std::string templ = (std::filesystem::temp_directory_path() / "steerkit-bridge-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) fail(ErrorCode::bridge_protocol, "cannot create scratch directory");
  return templ;
}

}  // namespace

BridgeClient::BridgeClient(const std::string& command, std::filesystem::path scratch) : scratch_(std::move(scratch)) {
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) protocol_error("pipe() failed");
  const std::string full = command + " --scratch " + shell_quote(scratch_.string());
  pid_ = ::fork();
  if (pid_ < 0) protocol_error("fork() failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", full.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);

  try {
    const std::string line = read_line();
    try {
      handshake_ = nlohmann::json::parse(line);
    } catch (const std::exception&) {
      protocol_error("handshake is not JSON: '" + line + "'");
    }
    if (!handshake_.is_object() || handshake_.value("protocol", "") != kBridgeProtocol) {
      protocol_error("unexpected handshake: " + line);
    }
    if (handshake_.value("version", -1) != kBridgeProtocolVersion) {
      protocol_error("unsupported bridge protocol version in handshake: " + line);
    }
  } catch (...) {
    // The destructor will not run; reap the child here.
    ::kill(pid_, SIGTERM);
    close();
    throw;
  }
}

BridgeClient::~BridgeClient() {
  try {
    close();
  } catch (...) {
  }
}

int BridgeClient::close() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  int status = 0;
  if (pid_ > 0) {
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string BridgeClient::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) protocol_error("bridge closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void BridgeClient::write_line(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) protocol_error("bridge closed its input");
    off += static_cast<std::size_t>(n);
  }
}

nlohmann::json BridgeClient::request(const nlohmann::json& message) {
  if (to_child_ < 0) protocol_error("bridge is closed");
  write_line(message.dump());
  const std::string line = read_line();
  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(line);
  } catch (const std::exception&) {
    protocol_error("response is not JSON: '" + line + "'");
  }
  if (!resp.is_object()) protocol_error("response is not an object");
  return resp;
}

BridgeReconstructor::BridgeReconstructor(const std::string& command, std::filesystem::path scratch)
    : command_(command), scratch_(std::move(scratch)) {
  require(!command_.empty(), ErrorCode::config, "bridge command is empty");
  if (scratch_.empty()) {
    scratch_ = make_temp_dir();
    owns_scratch_ = true;
  } else {
    std::filesystem::create_directories(scratch_);
  }
}

BridgeReconstructor::~BridgeReconstructor() {
  client_.reset();
  if (owns_scratch_) {
    std::error_code ec;
    std::filesystem::remove_all(scratch_, ec);
  }
}

nlohmann::json BridgeReconstructor::send(const char* mode, const FrameStack& frames, const Intrinsics& K) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (!client_) client_ = std::make_unique<BridgeClient>(command_, scratch_);
  const long id = next_id_++;
  nlohmann::json paths = nlohmann::json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto path = scratch_ / ("req" + std::to_string(id) + "_frame" + std::to_string(i) + ".f32t");
    write_tensor(path, to_tensor(frames.frames[i]));
    paths.push_back(path.string());
  }
  const nlohmann::json req = {{"id", id}, {"mode", mode}, {"frames", paths}, {"frame_indices", frames.indices},
                              {"intrinsics", K.to_json()}, {"scratch", scratch_.string()}};
  nlohmann::json resp = client_->request(req);
  // The child has answered, so it is done with the request tensors.
  std::error_code ec;
  for (const auto& path : paths) std::filesystem::remove(path.get<std::string>(), ec);
  if (resp.value("id", -1L) != id) protocol_error("response id does not match request " + std::to_string(id));
  const std::string status = resp.value("status", "");
  if (status.rfind("error:", 0) == 0) protocol_error("bridge reported " + status);
  if (status != "ok") protocol_error("invalid response status '" + status + "'");
  if (!resp.contains("poses") || !resp.at("poses").is_array() || resp.at("poses").size() != frames.size()) {
    protocol_error("response needs one pose path per frame");
  }
  return resp;
}

namespace {

Tensor read_response_tensor(const nlohmann::json& path) {
  if (!path.is_string()) protocol_error("tensor path is not a string");
  try {
    return read_tensor(path.get<std::string>());
  } catch (const Error& e) {
    protocol_error(std::string("response tensor unreadable: ") + e.what());
  }
}

std::vector<CameraPose> read_poses(const nlohmann::json& resp) {
  std::vector<CameraPose> poses;
  for (const auto& p : resp.at("poses")) {
    try {
      poses.push_back(pose_from_tensor(read_response_tensor(p)));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::bridge_protocol) throw;
      protocol_error(e.what());
    }
  }
  return poses;
}

}  // namespace

SceneEstimate3D BridgeReconstructor::reconstruct_3d(const FrameStack& frames, const Intrinsics& K) const {
  const nlohmann::json resp = send("3d", frames, K);
  SceneEstimate3D est;
  est.poses = read_poses(resp);
  if (!resp.contains("gaussians")) protocol_error("3d response lacks 'gaussians'");
  try {
    est.gaussians = gaussians_from_tensor(read_response_tensor(resp.at("gaussians")));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::bridge_protocol) throw;
    protocol_error(e.what());
  }
  discard_outputs(resp);
  return est;
}

SceneEstimate4D BridgeReconstructor::reconstruct_4d(const FrameStack& frames, const Intrinsics& K) const {
  const nlohmann::json resp = send("4d", frames, K);
  SceneEstimate4D est;
  est.poses = read_poses(resp);
  for (const char* key : {"pointmaps", "masks"}) {
    if (!resp.contains(key) || !resp.at(key).is_array() || resp.at(key).size() != frames.size()) {
      protocol_error(std::string("4d response needs one '") + key + "' path per frame");
    }
  }
  try {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      PointMap pm = pointmap_from_tensor(read_response_tensor(resp.at("pointmaps")[i]));
      BinaryMap m = mask_from_tensor(read_response_tensor(resp.at("masks")[i]));
      if (pm.height != K.height || pm.width != K.width || m.height != K.height || m.width != K.width) {
        protocol_error("pointmap or mask shape does not match the frame size");
      }
      est.pointmaps.push_back(std::move(pm));
      est.masks.push_back(std::move(m));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::bridge_protocol) throw;
    protocol_error(e.what());
  }
  discard_outputs(resp);
  return est;
}

void BridgeReconstructor::discard_outputs(const nlohmann::json& resp) const {
  const auto inside = [&](const nlohmann::json& p) {
    if (!p.is_string()) return;
    const std::filesystem::path path(p.get<std::string>());
    const auto rel = path.lexically_normal().lexically_relative(scratch_.lexically_normal());
    if (rel.empty() || *rel.begin() == "..") return;
    std::error_code ec;
    std::filesystem::remove(path, ec);
  };
  for (const char* key : {"poses", "pointmaps", "masks"}) {
    if (resp.contains(key) && resp.at(key).is_array()) {
      for (const auto& p : resp.at(key)) inside(p);
    }
  }
  if (resp.contains("gaussians")) inside(resp.at("gaussians"));
}

nlohmann::json BridgeReconstructor::describe() const { return {{"type", "bridge"}, {"command", command_}}; }

}  // namespace steerkit
