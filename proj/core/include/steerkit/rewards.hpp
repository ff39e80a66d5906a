// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "steerkit/geometry.hpp"
#include "steerkit/scene.hpp"

namespace steerkit {

/// Intermediate evaluations score Tweedie estimates during sampling; the final
/// evaluation scores the returned sample.
enum class EvalPhase { intermediate, final };

class RewardFn {
 public:
  virtual ~RewardFn() = default;
  virtual std::size_t dimension() const = 0;
  virtual double evaluate(std::span<const double> x, EvalPhase phase = EvalPhase::final) const = 0;
  virtual std::pair<double, double> range() const = 0;
  virtual nlohmann::json describe() const = 0;
};

class LinearReward final : public RewardFn {
 public:
  explicit LinearReward(std::vector<double> coefficients);
  std::size_t dimension() const override { return a_.size(); }
  double evaluate(std::span<const double> x, EvalPhase phase = EvalPhase::final) const override;
  std::pair<double, double> range() const override;
  nlohmann::json describe() const override;
  const std::vector<double>& coefficients() const noexcept { return a_; }

 private:
  std::vector<double> a_;
};

class QuadraticReward final : public RewardFn {
 public:
  QuadraticReward(std::vector<double> center, double scale);
  std::size_t dimension() const override { return center_.size(); }
  double evaluate(std::span<const double> x, EvalPhase phase = EvalPhase::final) const override;
  std::pair<double, double> range() const override;
  nlohmann::json describe() const override;

 private:
  std::vector<double> center_;
  double scale_;
};

/// Adds a bounded value in [-eta, eta], a hash of (sample bytes, seed), to
/// intermediate evaluations. Final evaluations pass through unchanged.
class PerturbedReward final : public RewardFn {
 public:
  PerturbedReward(std::shared_ptr<const RewardFn> base, double eta, std::uint64_t seed);
  std::size_t dimension() const override { return base_->dimension(); }
  double evaluate(std::span<const double> x, EvalPhase phase = EvalPhase::final) const override;
  std::pair<double, double> range() const override;
  nlohmann::json describe() const override;
  double perturbation(std::span<const double> x) const;

 private:
  std::shared_ptr<const RewardFn> base_;
  double eta_;
  std::uint64_t seed_;
};

std::shared_ptr<const RewardFn> linear_reward(std::vector<double> a);
std::shared_ptr<const RewardFn> quadratic_reward(std::vector<double> center, double scale);
std::shared_ptr<const RewardFn> perturbed_reward(std::shared_ptr<const RewardFn> base, double eta, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Geometric consistency rewards.

struct CosineResult {
  double mean = 0.0;
  double raw_sum = 0.0;
  std::size_t eligible = 0;
};

/// Mean per-pixel cosine over pixels that are unmasked, covered and nonzero in
/// both maps. Throws empty_support when no pixel is eligible.
CosineResult cosine_field(const FeatureMap& a, const FeatureMap& b, const BinaryMap* mask = nullptr,
                          const BinaryMap* coverage = nullptr);

struct GeoRewardConfig {
  int recon_frames = 8;
  /// Throw reward_undefined instead of returning 0 when no frame has support.
  bool strict = false;

  nlohmann::json to_json() const { return {{"recon_frames", recon_frames}, {"strict", strict}}; }
};

/// Evenly spaced indices round-half-up(i * (N-1) / (n-1)), first and last included.
std::vector<int> select_frames(int N, int n);

/// Source frames take odd 1-based positions (0-based 0, 2, 4, ...), targets the even ones.
struct FrameSplit {
  std::vector<int> src;
  std::vector<int> tgt;
};

FrameSplit split_frames(int n);

struct FrameScore {
  int frame = 0;
  double score = 0.0;
  std::size_t eligible = 0;
  double raw_sum = 0.0;
};

struct GeoScore {
  double score = 0.0;
  /// Set when no frame had eligible support; score is then 0.
  bool zero_support = false;
  std::vector<FrameScore> frames;
};

/// The frames are the full video; config.recon_frames of them are selected
/// and compared with renders of the estimate from the matching poses.
GeoScore gs_met3r(const FrameStack& frames, const GeoRewardConfig& config, const SceneEstimate3D& recon,
                  const Intrinsics& K);

/// Background features of source frames, lifted through their pointmaps and
/// splatted into every target view, compared against the target frames.
GeoScore dyn_met3r(const FrameStack& frames, const GeoRewardConfig& config, const SceneEstimate4D& recon,
                   const Intrinsics& K);

/// Frames selected by the reward config, in selection order.
FrameStack select_stack(const FrameStack& frames, const GeoRewardConfig& config);

}  // namespace steerkit
