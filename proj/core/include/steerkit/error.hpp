// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace steerkit {

enum class ErrorCode {
  invalid_argument,
  numeric,
  schedule_infeasible,
  degenerate_weights,
  behind_camera,
  empty_support,
  reward_undefined,
  format,
  config,
  unsupported,
  bridge_protocol,
};

const char* to_string(ErrorCode code) noexcept;

/// The single exception type thrown by the library. The code is stable and is
/// what the CLI maps to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace steerkit
