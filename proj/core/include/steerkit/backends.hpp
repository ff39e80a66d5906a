// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

#include "steerkit/rewards.hpp"
#include "steerkit/rng.hpp"
#include "steerkit/scene.hpp"

namespace steerkit {

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal
};

class GaussianMixtureModel {
 public:
  explicit GaussianMixtureModel(std::vector<GaussianComponent> components);

  /// Single component N(0, I) in `dim` dimensions.
  static GaussianMixtureModel standard_normal(std::size_t dim);

  std::size_t dimension() const noexcept { return dim_; }
  const std::vector<GaussianComponent>& components() const noexcept { return comps_; }

  /// E[x0 | x_t] under x_t = sqrt(ab) x0 + sqrt(1 - ab) eps. Valid for ab in [0, 1].
  void posterior_mean_diffusion(std::span<const double> x, double alpha_bar, std::span<double> out) const;
  /// E[x0 | x_t] and E[z | x_t] under x_t = (1 - t) x0 + t z. Valid for t in [0, 1].
  void posterior_means_flow(std::span<const double> x, double t, std::span<double> x0_out, std::span<double> z_out) const;

  void sample(CounterRng& rng, std::span<double> out) const;

  nlohmann::json to_json() const;
  static GaussianMixtureModel from_json(const nlohmann::json& j);

 private:
  std::size_t dim_ = 0;
  std::vector<GaussianComponent> comps_;
  bool standard_normal_ = false;
};

/// v-prediction: v = (sqrt(ab) x_t - E[x0 | x_t]) / sqrt(1 - ab). Requires 0 < ab < 1.
std::vector<double> gmm_velocity(std::span<const double> x, double alpha_bar, const GaussianMixtureModel& model);
/// E[z - x0 | x_t] under the linear interpolant. Requires 0 < t < 1.
std::vector<double> gmm_flow_velocity(std::span<const double> x, double t, const GaussianMixtureModel& model);

struct TiltedMoments {
  std::vector<double> mean;
  Eigen::MatrixXd covariance;
};

TiltedMoments analytic_tilted_moments(const GaussianMixtureModel& model, std::span<const double> a, double lambda);
/// Throws unsupported unless the reward is a LinearReward.
TiltedMoments analytic_tilted_moments(const GaussianMixtureModel& model, const RewardFn& reward, double lambda);

// ---------------------------------------------------------------------------
// Model interfaces consumed by the samplers.

class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  virtual std::size_t dimension() const = 0;
  /// v-prediction at noise level alpha_bar in (0, 1).
  virtual void velocity(std::span<const double> x, double alpha_bar, std::span<double> out) const = 0;
  /// Draw from the terminal noise distribution.
  virtual void sample_noise(CounterRng& rng, std::span<double> out) const;
};

class FlowModel {
 public:
  virtual ~FlowModel() = default;
  virtual std::size_t dimension() const = 0;
  /// Flow velocity at time t in (0, 1]. The t = 1 limit is the data mean
  /// offset, which the first sampling step needs.
  virtual void flow_velocity(std::span<const double> x, double t, std::span<double> out) const = 0;
  virtual void sample_noise(CounterRng& rng, std::span<double> out) const;
};

class GmmBackend final : public VelocityModel, public FlowModel {
 public:
  explicit GmmBackend(GaussianMixtureModel model) : model_(std::move(model)) {}
  std::size_t dimension() const override { return model_.dimension(); }
  void velocity(std::span<const double> x, double alpha_bar, std::span<double> out) const override;
  void flow_velocity(std::span<const double> x, double t, std::span<double> out) const override;
  void sample_noise(CounterRng& rng, std::span<double> out) const override;
  const GaussianMixtureModel& model() const noexcept { return model_; }

 private:
  GaussianMixtureModel model_;
};

// ---------------------------------------------------------------------------
// Scene-video backend.

/// Per-coordinate scales applied to the standard-normal latent.
struct LatentMagnitudes {
  double rotation = 0.02;     // radians
  double translation = 0.05;  // scene units
  double texture = 0.1;

  nlohmann::json to_json() const {
    return {{"rotation", rotation}, {"translation", translation}, {"texture", texture}};
  }
  static LatentMagnitudes from_json(const nlohmann::json& j);
};

/// Latent layout: per frame [omega(3), tau(3), texture(C)], frame-major.
std::size_t scene_latent_dimension(const GroundTruthScene& scene);

/// Renders the listed frames (all when empty). Frame i uses the pose
/// R' = exp(omega_i) R_i, t' = exp(omega_i) t_i + tau_i and adds texture_i to
/// every covered pixel's features.
FrameStack scene_latent_decode(std::span<const double> latent, const GroundTruthScene& scene,
                               const LatentMagnitudes& magnitudes = {}, const std::vector<int>& frames = {});

/// f_phi stand-ins. Implementations must be callable from several threads.
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  virtual SceneEstimate3D reconstruct_3d(const FrameStack& frames, const Intrinsics& K) const = 0;
  virtual SceneEstimate4D reconstruct_4d(const FrameStack& frames, const Intrinsics& K) const = 0;
  virtual nlohmann::json describe() const = 0;
};

class OracleReconstructor final : public Reconstructor {
 public:
  OracleReconstructor(std::shared_ptr<const GroundTruthScene> scene, OracleOptions options = {})
      : scene_(std::move(scene)), options_(options) {}
  SceneEstimate3D reconstruct_3d(const FrameStack& frames, const Intrinsics& K) const override;
  SceneEstimate4D reconstruct_4d(const FrameStack& frames, const Intrinsics& K) const override;
  nlohmann::json describe() const override;

 private:
  std::shared_ptr<const GroundTruthScene> scene_;
  OracleOptions options_;
};

class SceneVideoBackend final : public VelocityModel, public FlowModel {
 public:
  SceneVideoBackend(std::shared_ptr<const GroundTruthScene> scene, LatentMagnitudes magnitudes = {});
  std::size_t dimension() const override { return dim_; }
  /// The latent prior is N(0, I): the v-prediction velocity is identically
  /// zero and the flow velocity is ((2t - 1) / ((1 - t)^2 + t^2)) x.
  void velocity(std::span<const double> x, double alpha_bar, std::span<double> out) const override;
  void flow_velocity(std::span<const double> x, double t, std::span<double> out) const override;

  const GroundTruthScene& scene() const noexcept { return *scene_; }
  std::shared_ptr<const GroundTruthScene> scene_ptr() const noexcept { return scene_; }
  const LatentMagnitudes& magnitudes() const noexcept { return magnitudes_; }

 private:
  std::shared_ptr<const GroundTruthScene> scene_;
  LatentMagnitudes magnitudes_;
  std::size_t dim_;
};

enum class GeoRewardKind { gs, dyn };

/// Decodes only the frames the reward reconstructs, then scores them.
class SceneReward final : public RewardFn {
 public:
  SceneReward(std::shared_ptr<const SceneVideoBackend> backend, std::shared_ptr<const Reconstructor> recon,
              GeoRewardKind kind, GeoRewardConfig config = {});
  std::size_t dimension() const override { return backend_->dimension(); }
  double evaluate(std::span<const double> x, EvalPhase phase = EvalPhase::final) const override;
  std::pair<double, double> range() const override { return {-1.0, 1.0}; }
  nlohmann::json describe() const override;
  GeoScore score(std::span<const double> x) const;

 private:
  std::shared_ptr<const SceneVideoBackend> backend_;
  std::shared_ptr<const Reconstructor> recon_;
  GeoRewardKind kind_;
  GeoRewardConfig config_;
  std::vector<int> selected_;
};

}  // namespace steerkit
