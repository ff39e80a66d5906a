// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "steerkit/error.hpp"

namespace steerkit {
namespace {

constexpr double kMaxBeta = 0.999;

// round-half-up of num/den for num >= 0, den > 0, in exact integer arithmetic.
long long round_half_up(long long num, long long den) { return (2 * num + den) / (2 * den); }

}  // namespace

std::string to_string(NoiseScheduleKind kind) {
  return kind == NoiseScheduleKind::cosine ? "cosine" : "linear_beta";
}

NoiseScheduleKind parse_noise_schedule_kind(std::string_view name) {
  if (name == "cosine") return NoiseScheduleKind::cosine;
  if (name == "linear_beta" || name == "linear-beta") return NoiseScheduleKind::linear_beta;
  fail(ErrorCode::invalid_argument, "unknown noise schedule '" + std::string(name) + "'");
}

TimestepSchedule::TimestepSchedule(NoiseScheduleKind kind, std::vector<double> alpha_bar)
    : kind_(kind), alpha_bar_(std::move(alpha_bar)) {
  require(alpha_bar_.size() >= 2, ErrorCode::invalid_argument, "schedule needs at least two levels");
  require(alpha_bar_[0] == 1.0, ErrorCode::invalid_argument, "alpha_bar(0) must be 1");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    const double a = alpha_bar_[t];
    require(a > 0.0 && a < alpha_bar_[t - 1], ErrorCode::invalid_argument,
            "alpha_bar must be positive and strictly decreasing in t");
  }
}

double TimestepSchedule::alpha_bar(int t) const {
  require(t >= 0 && t <= total_steps(), ErrorCode::invalid_argument,
          "timestep " + std::to_string(t) + " outside [0, " + std::to_string(total_steps()) + "]");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

nlohmann::json TimestepSchedule::to_json() const {
  return {{"kind", to_string(kind_)}, {"total_steps", total_steps()}, {"alpha_bar", alpha_bar_}};
}

TimestepSchedule build_alpha_bar_schedule(int T, NoiseScheduleKind kind) {
  require(T >= 2, ErrorCode::invalid_argument, "T must be >= 2, got " + std::to_string(T));
  std::vector<double> ab(static_cast<std::size_t>(T) + 1);
  ab[0] = 1.0;
  if (kind == NoiseScheduleKind::linear_beta) {
    // Betas span [1e-4, 2e-2] at T = 1000 and scale inversely with T.
    const double scale = 1000.0 / T;
    const double b0 = 1e-4 * scale;
    const double b1 = 0.02 * scale;
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double beta = std::min(b0 + (b1 - b0) * (t - 1) / (T - 1), kMaxBeta);
      prod *= 1.0 - beta;
      ab[static_cast<std::size_t>(t)] = prod;
    }
  } else {
    constexpr double s = 0.008;
    const auto f = [&](int t) {
      const double c = std::cos((static_cast<double>(t) / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double beta = std::min(1.0 - f(t) / f(t - 1), kMaxBeta);
      prod *= 1.0 - beta;
      ab[static_cast<std::size_t>(t)] = prod;
    }
  }
  return TimestepSchedule(kind, std::move(ab));
}

FlowTimeGrid::FlowTimeGrid(int steps) : steps_(steps) {
  require(steps >= 1, ErrorCode::invalid_argument, "flow grid needs steps >= 1");
  times_.resize(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) times_[static_cast<std::size_t>(j)] = static_cast<double>(steps - j) / steps;
}

double FlowTimeGrid::time_at(int i) const {
  require(i >= 0 && i <= steps_, ErrorCode::invalid_argument, "flow index out of range");
  return times_[static_cast<std::size_t>(steps_ - i)];
}

nlohmann::json FlowTimeGrid::to_json() const { return {{"steps", steps_}, {"times", times_}}; }

FlowTimeGrid build_flow_grid(int steps) { return FlowTimeGrid(steps); }

std::string to_string(ResamplingMode mode) {
  switch (mode) {
    case ResamplingMode::early: return "early";
    case ResamplingMode::linear: return "linear";
    case ResamplingMode::late: return "late";
    case ResamplingMode::every: return "every";
    case ResamplingMode::custom: return "custom";
  }
  return "custom";
}

ResamplingMode parse_resampling_mode(std::string_view name) {
  if (name == "early") return ResamplingMode::early;
  if (name == "linear") return ResamplingMode::linear;
  if (name == "late") return ResamplingMode::late;
  if (name == "every") return ResamplingMode::every;
  if (name == "custom" || name == "none") return ResamplingMode::custom;
  fail(ErrorCode::invalid_argument, "unknown resampling mode '" + std::string(name) + "'");
}

bool ResamplingSchedule::contains(int t) const noexcept {
  return std::find(steering_steps.begin(), steering_steps.end(), t) != steering_steps.end();
}

nlohmann::json ResamplingSchedule::to_json() const {
  return {{"mode", to_string(mode)}, {"M", size()}, {"total_steps", total_steps}, {"steering_steps", steering_steps}};
}

ResamplingSchedule ResamplingSchedule::none(int T) { return {ResamplingMode::custom, T, {}}; }

ResamplingSchedule ResamplingSchedule::every_step(int T) {
  require(T >= 1, ErrorCode::invalid_argument, "T must be >= 1");
  ResamplingSchedule s{ResamplingMode::every, T, {}};
  for (int t = T - 1; t >= 0; --t) s.steering_steps.push_back(t);
  return s;
}

ResamplingSchedule ResamplingSchedule::custom_steps(int T, std::vector<int> steps) {
  require(T >= 1, ErrorCode::invalid_argument, "T must be >= 1");
  std::sort(steps.begin(), steps.end(), std::greater<>());
  require(std::adjacent_find(steps.begin(), steps.end()) == steps.end(), ErrorCode::schedule_infeasible,
          "duplicate steering step");
  for (int t : steps) {
    require(t >= 0 && t < T, ErrorCode::invalid_argument, "steering step " + std::to_string(t) + " outside [0, T)");
  }
  return {ResamplingMode::custom, T, std::move(steps)};
}

std::pair<int, int> resampling_window(int T, ResamplingMode mode) {
  switch (mode) {
    case ResamplingMode::early:
      return {static_cast<int>(round_half_up(6LL * T, 10)), static_cast<int>(round_half_up(8LL * T, 10))};
    case ResamplingMode::late:
      return {static_cast<int>(round_half_up(2LL * T, 10)), static_cast<int>(round_half_up(4LL * T, 10))};
    default:
      return {0, T};
  }
}

ResamplingSchedule build_resampling_schedule(int T, int M, ResamplingMode mode) {
  require(T >= 1, ErrorCode::invalid_argument, "T must be >= 1");
  require(M >= 1, ErrorCode::invalid_argument, "M must be >= 1");
  require(M <= T, ErrorCode::invalid_argument, "M=" + std::to_string(M) + " exceeds T=" + std::to_string(T));
  ResamplingSchedule s{mode, T, {}};
  if (mode == ResamplingMode::every) {
    require(M == T, ErrorCode::invalid_argument, "mode 'every' requires M = T");
    return ResamplingSchedule::every_step(T);
  }
  require(mode != ResamplingMode::custom, ErrorCode::invalid_argument, "custom schedules use custom_steps()");
  if (mode == ResamplingMode::linear) {
    // Interior points T*j/(M+1), j = M..1, strictly inside (0, T).
    for (int j = M; j >= 1; --j) {
      s.steering_steps.push_back(static_cast<int>(round_half_up(static_cast<long long>(T) * j, M + 1)));
    }
  } else {
    require(T >= 5, ErrorCode::invalid_argument, "early/late modes need T >= 5");
    const auto [lo, hi] = resampling_window(T, mode);
    if (M == 1) {
      s.steering_steps.push_back(hi);
    } else {
      // hi - (hi - lo) * j / (M - 1), j = 0..M-1, with round-half-up.
      const long long span = hi - lo;
      for (int j = 0; j < M; ++j) {
        const long long offset = span * j;  // over (M - 1)
        // hi - offset/(M-1) rounded half-up == (hi*(M-1) - offset) / (M-1) rounded half-up.
        s.steering_steps.push_back(static_cast<int>(round_half_up(hi * (M - 1LL) - offset, M - 1LL)));
      }
    }
  }
  for (std::size_t i = 1; i < s.steering_steps.size(); ++i) {
    if (s.steering_steps[i] == s.steering_steps[i - 1]) {
      std::string list;
      for (int t : s.steering_steps) list += (list.empty() ? "" : ",") + std::to_string(t);
      fail(ErrorCode::schedule_infeasible, "M=" + std::to_string(M) + " steps collapse in window for T=" +
                                               std::to_string(T) + " (" + list + ")");
    }
  }
  // Window index T is the pure-noise state; it is reached only as x_T, never produced.
  for (int& t : s.steering_steps) {
    if (t >= T) {
      fail(ErrorCode::schedule_infeasible, "steering step " + std::to_string(t) + " is not a produced timestep");
    }
  }
  return s;
}

}  // namespace steerkit
