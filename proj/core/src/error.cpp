// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/error.hpp"

namespace steerkit {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::numeric: return "numeric-error";
    case ErrorCode::schedule_infeasible: return "schedule-infeasible";
    case ErrorCode::degenerate_weights: return "degenerate-weights";
    case ErrorCode::behind_camera: return "behind-camera";
    case ErrorCode::empty_support: return "empty-support";
    case ErrorCode::reward_undefined: return "reward-undefined";
    case ErrorCode::format: return "format-error";
    case ErrorCode::config: return "config-error";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::bridge_protocol: return "bridge-protocol";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace steerkit
