// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/rewards.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "steerkit/error.hpp"
#include "steerkit/rng.hpp"

namespace steerkit {
namespace {

constexpr double kMinNorm = 1e-12;

void check_dim(std::size_t expected, std::size_t got) {
  require(expected == got, ErrorCode::invalid_argument,
          "reward expects dimension " + std::to_string(expected) + ", got " + std::to_string(got));
}

}  // namespace

LinearReward::LinearReward(std::vector<double> coefficients) : a_(std::move(coefficients)) {
  require(!a_.empty(), ErrorCode::invalid_argument, "linear reward needs coefficients");
}

double LinearReward::evaluate(std::span<const double> x, EvalPhase) const {
  check_dim(a_.size(), x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += a_[i] * x[i];
  return s;
}

std::pair<double, double> LinearReward::range() const {
  return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
}

nlohmann::json LinearReward::describe() const { return {{"type", "linear"}, {"coefficients", a_}}; }

QuadraticReward::QuadraticReward(std::vector<double> center, double scale) : center_(std::move(center)), scale_(scale) {
  require(!center_.empty(), ErrorCode::invalid_argument, "quadratic reward needs a center");
  require(scale >= 0.0, ErrorCode::invalid_argument, "quadratic scale must be >= 0");
}

double QuadraticReward::evaluate(std::span<const double> x, EvalPhase) const {
  check_dim(center_.size(), x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - center_[i]) * (x[i] - center_[i]);
  return -scale_ * s;
}

std::pair<double, double> QuadraticReward::range() const { return {-std::numeric_limits<double>::infinity(), 0.0}; }

nlohmann::json QuadraticReward::describe() const {
  return {{"type", "quadratic"}, {"center", center_}, {"scale", scale_}};
}

PerturbedReward::PerturbedReward(std::shared_ptr<const RewardFn> base, double eta, std::uint64_t seed)
    : base_(std::move(base)), eta_(eta), seed_(seed) {
  require(base_ != nullptr, ErrorCode::invalid_argument, "perturbed reward needs a base");
  require(eta >= 0.0, ErrorCode::invalid_argument, "eta must be >= 0");
}

double PerturbedReward::perturbation(std::span<const double> x) const {
  std::uint64_t h = mix64(seed_ ^ 0xB1A5ED0FF5E7ULL);
  for (double v : x) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
  return eta_ * (2.0 * u - 1.0);
}

double PerturbedReward::evaluate(std::span<const double> x, EvalPhase phase) const {
  const double r = base_->evaluate(x, phase);
  if (phase == EvalPhase::final || eta_ == 0.0) return r;
  return r + perturbation(x);
}

std::pair<double, double> PerturbedReward::range() const {
  const auto [lo, hi] = base_->range();
  return {lo - eta_, hi + eta_};
}

nlohmann::json PerturbedReward::describe() const {
  return {{"type", "perturbed"}, {"eta", eta_}, {"seed", seed_}, {"base", base_->describe()}};
}

std::shared_ptr<const RewardFn> linear_reward(std::vector<double> a) {
  return std::make_shared<LinearReward>(std::move(a));
}

std::shared_ptr<const RewardFn> quadratic_reward(std::vector<double> center, double scale) {
  return std::make_shared<QuadraticReward>(std::move(center), scale);
}

std::shared_ptr<const RewardFn> perturbed_reward(std::shared_ptr<const RewardFn> base, double eta, std::uint64_t seed) {
  return std::make_shared<PerturbedReward>(std::move(base), eta, seed);
}

CosineResult cosine_field(const FeatureMap& a, const FeatureMap& b, const BinaryMap* mask, const BinaryMap* coverage) {
  require(a.height() == b.height() && a.width() == b.width() && a.channels() == b.channels(),
          ErrorCode::invalid_argument, "feature map shapes differ");
  const std::size_t n = a.pixels();
  require(!mask || mask->values.size() == n, ErrorCode::invalid_argument, "mask shape differs");
  require(!coverage || coverage->values.size() == n, ErrorCode::invalid_argument, "coverage shape differs");
  const int C = a.channels();
  CosineResult res;
  for (std::size_t p = 0; p < n; ++p) {
    if (mask && mask->values[p]) continue;
    if (coverage && !coverage->values[p]) continue;
    const double* x = a.pixel(p);
    const double* y = b.pixel(p);
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (int c = 0; c < C; ++c) {
      xy += x[c] * y[c];
      xx += x[c] * x[c];
      yy += y[c] * y[c];
    }
    const double nx = std::sqrt(xx), ny = std::sqrt(yy);
    if (nx < kMinNorm || ny < kMinNorm) continue;
    res.raw_sum += std::clamp(xy / (nx * ny), -1.0, 1.0);
    ++res.eligible;
  }
  if (res.eligible == 0) fail(ErrorCode::empty_support, "no eligible pixels");
  res.mean = res.raw_sum / static_cast<double>(res.eligible);
  return res;
}

std::vector<int> select_frames(int N, int n) {
  require(N >= 1 && n >= 1 && n <= N, ErrorCode::invalid_argument,
          "cannot select " + std::to_string(n) + " of " + std::to_string(N) + " frames");
  if (n == 1) return {0};
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    const long long num = static_cast<long long>(i) * (N - 1);
    out.push_back(static_cast<int>((2 * num + (n - 1)) / (2LL * (n - 1))));
  }
  return out;
}

FrameSplit split_frames(int n) {
  require(n >= 1, ErrorCode::invalid_argument, "split needs >= 1 frame");
  FrameSplit s;
  for (int i = 0; i < n; ++i) (i % 2 == 0 ? s.src : s.tgt).push_back(i);
  return s;
}

FrameStack select_stack(const FrameStack& frames, const GeoRewardConfig& config) {
  require(frames.indices.size() == frames.frames.size(), ErrorCode::invalid_argument, "frame stack is inconsistent");
  FrameStack out;
  for (int pos : select_frames(static_cast<int>(frames.size()), config.recon_frames)) {
    out.indices.push_back(frames.indices[static_cast<std::size_t>(pos)]);
    out.frames.push_back(frames.frames[static_cast<std::size_t>(pos)]);
  }
  return out;
}

namespace {

GeoScore finish(GeoScore s, const GeoRewardConfig& config, const char* name) {
  double sum = 0.0;
  bool any = false;
  for (const FrameScore& f : s.frames) {
    sum += f.score;
    any = any || f.eligible > 0;
  }
  if (!any) {
    if (config.strict) fail(ErrorCode::reward_undefined, std::string(name) + ": no frame has eligible support");
    s.zero_support = true;
    s.score = 0.0;
    return s;
  }
  s.score = sum / static_cast<double>(s.frames.size());
  return s;
}

FrameScore score_frame(int frame, const FeatureMap& a, const FeatureMap& b, const BinaryMap* mask,
                       const BinaryMap* coverage) {
  FrameScore fs{frame, 0.0, 0, 0.0};
  try {
    const CosineResult c = cosine_field(a, b, mask, coverage);
    fs.score = c.mean;
    fs.eligible = c.eligible;
    fs.raw_sum = c.raw_sum;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::empty_support) throw;
  }
  return fs;
}

}  // namespace

GeoScore gs_met3r(const FrameStack& frames, const GeoRewardConfig& config, const SceneEstimate3D& recon,
                  const Intrinsics& K) {
  const FrameStack sel = select_stack(frames, config);
  require(recon.poses.size() == sel.size(), ErrorCode::invalid_argument,
          "estimate has " + std::to_string(recon.poses.size()) + " poses for " + std::to_string(sel.size()) +
              " selected frames");
  const GaussianRenderer renderer(recon.gaussians);
  GeoScore s;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const FeatureMap render = renderer.render(recon.poses[i], K);
    s.frames.push_back(score_frame(sel.indices[i], sel.frames[i], render, nullptr, nullptr));
  }
  return finish(std::move(s), config, "gs_met3r");
}

GeoScore dyn_met3r(const FrameStack& frames, const GeoRewardConfig& config, const SceneEstimate4D& recon,
                   const Intrinsics& K) {
  const FrameStack sel = select_stack(frames, config);
  const std::size_t n = sel.size();
  require(recon.poses.size() == n && recon.pointmaps.size() == n && recon.masks.size() == n,
          ErrorCode::invalid_argument, "estimate needs one pose, pointmap and mask per selected frame");
  const FrameSplit split = split_frames(static_cast<int>(n));

  FeaturedPoints background;
  background.channels = sel.frames.front().channels();
  for (int s : split.src) {
    const auto i = static_cast<std::size_t>(s);
    const FeatureMap& f = sel.frames[i];
    const PointMap& pm = recon.pointmaps[i];
    const DynamicMask& m = recon.masks[i];
    require(pm.points.size() == f.pixels() && m.values.size() == f.pixels(), ErrorCode::invalid_argument,
            "pointmap or mask size differs from frame");
    for (std::size_t p = 0; p < f.pixels(); ++p) {
      if (!pm.validity.values[p] || m.values[p]) continue;
      background.positions.push_back(pm.points[p]);
      background.features.insert(background.features.end(), f.pixel(p), f.pixel(p) + f.channels());
    }
  }

  GeoScore out;
  for (int t : split.tgt) {
    const auto i = static_cast<std::size_t>(t);
    const SplatResult splat = splat_points(background, {}, recon.poses[i], K);
    out.frames.push_back(score_frame(sel.indices[i], sel.frames[i], splat.features, &recon.masks[i], &splat.coverage));
  }
  if (out.frames.empty()) fail(ErrorCode::invalid_argument, "dyn_met3r needs >= 2 selected frames");
  return finish(std::move(out), config, "dyn_met3r");
}

}  // namespace steerkit
