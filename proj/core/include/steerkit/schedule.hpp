// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace steerkit {

enum class NoiseScheduleKind { linear_beta, cosine };

std::string to_string(NoiseScheduleKind kind);
NoiseScheduleKind parse_noise_schedule_kind(std::string_view name);

/// Cumulative signal ratios alpha_bar(t) for t = 0..T. alpha_bar(0) is the
/// clean end (exactly 1) and alpha_bar(T) the noisiest.
class TimestepSchedule {
 public:
  TimestepSchedule(NoiseScheduleKind kind, std::vector<double> alpha_bar);

  int total_steps() const noexcept { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const;
  const std::vector<double>& values() const noexcept { return alpha_bar_; }
  NoiseScheduleKind kind() const noexcept { return kind_; }

  nlohmann::json to_json() const;

 private:
  NoiseScheduleKind kind_;
  std::vector<double> alpha_bar_;
};

TimestepSchedule build_alpha_bar_schedule(int T, NoiseScheduleKind kind);

/// Flow times stored in sampling order: times()[0] = 1, times()[steps] = 0.
/// time_at(i) is t_i = i / steps.
class FlowTimeGrid {
 public:
  explicit FlowTimeGrid(int steps);

  int steps() const noexcept { return steps_; }
  const std::vector<double>& times() const noexcept { return times_; }
  double time_at(int i) const;

  nlohmann::json to_json() const;

 private:
  int steps_;
  std::vector<double> times_;
};

FlowTimeGrid build_flow_grid(int steps);

/// `every` scores all T steps and `custom` holds an explicit set; both exist
/// for validation runs and sit outside the three placement modes.
enum class ResamplingMode { early, linear, late, every, custom };

std::string to_string(ResamplingMode mode);
ResamplingMode parse_resampling_mode(std::string_view name);

/// Steering steps are timestep indices in descending (sampling) order. A step
/// index t means "after producing x_t from x_{t+1}".
struct ResamplingSchedule {
  ResamplingMode mode = ResamplingMode::custom;
  int total_steps = 0;
  std::vector<int> steering_steps;

  int size() const noexcept { return static_cast<int>(steering_steps.size()); }
  bool contains(int t) const noexcept;
  nlohmann::json to_json() const;

  static ResamplingSchedule none(int T);
  static ResamplingSchedule every_step(int T);
  static ResamplingSchedule custom_steps(int T, std::vector<int> steps);
};

/// Inclusive window [lo, hi] of a placement mode, rounded half-up.
std::pair<int, int> resampling_window(int T, ResamplingMode mode);

ResamplingSchedule build_resampling_schedule(int T, int M, ResamplingMode mode);

}  // namespace steerkit
