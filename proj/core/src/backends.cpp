// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/backends.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "steerkit/error.hpp"

namespace steerkit {
namespace {

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::numeric, std::string(what) + " contains a non-finite value");
  }
}

// Normalised responsibilities from unnormalised log weights.
void softmax_inplace(std::vector<double>& logw) {
  const double m = *std::max_element(logw.begin(), logw.end());
  double s = 0.0;
  for (double& v : logw) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : logw) v /= s;
}

}  // namespace

GaussianMixtureModel::GaussianMixtureModel(std::vector<GaussianComponent> components) : comps_(std::move(components)) {
  require(!comps_.empty(), ErrorCode::invalid_argument, "mixture needs >= 1 component");
  dim_ = comps_.front().mean.size();
  require(dim_ >= 1, ErrorCode::invalid_argument, "mixture dimension must be >= 1");
  double wsum = 0.0;
  for (const GaussianComponent& c : comps_) {
    require(c.mean.size() == dim_ && c.variance.size() == dim_, ErrorCode::invalid_argument,
            "component dimensions differ");
    require(c.weight > 0.0 && c.weight <= 1.0, ErrorCode::invalid_argument, "component weight outside (0, 1]");
    for (double v : c.variance) require(v > 0.0 && std::isfinite(v), ErrorCode::invalid_argument, "variance must be positive");
    for (double m : c.mean) require(std::isfinite(m), ErrorCode::invalid_argument, "mean must be finite");
    wsum += c.weight;
  }
  require(std::abs(wsum - 1.0) <= 1e-9, ErrorCode::invalid_argument, "component weights must sum to 1");
  standard_normal_ = comps_.size() == 1 &&
                     std::all_of(comps_[0].mean.begin(), comps_[0].mean.end(), [](double m) { return m == 0.0; }) &&
                     std::all_of(comps_[0].variance.begin(), comps_[0].variance.end(), [](double v) { return v == 1.0; });
}

GaussianMixtureModel GaussianMixtureModel::standard_normal(std::size_t dim) {
  return GaussianMixtureModel({{1.0, std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}});
}

void GaussianMixtureModel::posterior_mean_diffusion(std::span<const double> x, double ab, std::span<double> out) const {
  require(x.size() == dim_ && out.size() == dim_, ErrorCode::invalid_argument, "dimension mismatch");
  const double sa = std::sqrt(ab);
  if (standard_normal_) {
    for (std::size_t d = 0; d < dim_; ++d) out[d] = sa * x[d];
    return;
  }
  std::vector<double> resp(comps_.size());
  for (std::size_t c = 0; c < comps_.size(); ++c) {
    double lw = std::log(comps_[c].weight);
    for (std::size_t d = 0; d < dim_; ++d) {
      const double var = ab * comps_[c].variance[d] + 1.0 - ab;
      const double r = x[d] - sa * comps_[c].mean[d];
      lw -= 0.5 * (r * r / var + std::log(var));
    }
    resp[c] = lw;
  }
  softmax_inplace(resp);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t c = 0; c < comps_.size(); ++c) {
    for (std::size_t d = 0; d < dim_; ++d) {
      const double s2 = comps_[c].variance[d];
      const double mu = comps_[c].mean[d];
      const double var = ab * s2 + 1.0 - ab;
      out[d] += resp[c] * (sa * s2 * x[d] + (1.0 - ab) * mu) / var;
    }
  }
}

void GaussianMixtureModel::posterior_means_flow(std::span<const double> x, double t, std::span<double> x0_out,
                                                std::span<double> z_out) const {
  require(x.size() == dim_ && x0_out.size() == dim_ && z_out.size() == dim_, ErrorCode::invalid_argument,
          "dimension mismatch");
  const double s = 1.0 - t;
  std::vector<double> resp(comps_.size());
  for (std::size_t c = 0; c < comps_.size(); ++c) {
    double lw = std::log(comps_[c].weight);
    for (std::size_t d = 0; d < dim_; ++d) {
      const double D = s * s * comps_[c].variance[d] + t * t;
      const double r = x[d] - s * comps_[c].mean[d];
      lw -= 0.5 * (r * r / D + std::log(D));
    }
    resp[c] = lw;
  }
  softmax_inplace(resp);
  std::fill(x0_out.begin(), x0_out.end(), 0.0);
  std::fill(z_out.begin(), z_out.end(), 0.0);
  for (std::size_t c = 0; c < comps_.size(); ++c) {
    for (std::size_t d = 0; d < dim_; ++d) {
      const double s2 = comps_[c].variance[d];
      const double mu = comps_[c].mean[d];
      const double D = s * s * s2 + t * t;
      const double r = x[d] - s * mu;
      x0_out[d] += resp[c] * (mu + s * s2 * r / D);
      z_out[d] += resp[c] * (t * r / D);
    }
  }
}

void GaussianMixtureModel::sample(CounterRng& rng, std::span<double> out) const {
  require(out.size() == dim_, ErrorCode::invalid_argument, "dimension mismatch");
  const double u = rng.uniform();
  std::size_t c = 0;
  double acc = comps_[0].weight;
  while (u >= acc && c + 1 < comps_.size()) acc += comps_[++c].weight;
  for (std::size_t d = 0; d < dim_; ++d) out[d] = comps_[c].mean[d] + std::sqrt(comps_[c].variance[d]) * rng.normal();
}

nlohmann::json GaussianMixtureModel::to_json() const {
  nlohmann::json comps = nlohmann::json::array();
  for (const GaussianComponent& c : comps_) comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
  return {{"components", comps}};
}

GaussianMixtureModel GaussianMixtureModel::from_json(const nlohmann::json& j) {
  require(j.contains("components") && j.at("components").is_array(), ErrorCode::config, "gmm needs a components array");
  std::vector<GaussianComponent> comps;
  for (const auto& c : j.at("components")) {
    for (const auto& [key, value] : c.items()) {
      require(key == "weight" || key == "mean" || key == "variance", ErrorCode::config, "unknown component field '" + key + "'");
    }
    comps.push_back({c.value("weight", 1.0), c.at("mean").get<std::vector<double>>(), c.at("variance").get<std::vector<double>>()});
  }
  return GaussianMixtureModel(std::move(comps));
}

std::vector<double> gmm_velocity(std::span<const double> x, double alpha_bar, const GaussianMixtureModel& model) {
  require(alpha_bar > 0.0 && alpha_bar < 1.0, ErrorCode::invalid_argument, "alpha_bar must lie in (0, 1)");
  require(x.size() == model.dimension(), ErrorCode::invalid_argument, "dimension mismatch");
  check_finite(x, "x");
  std::vector<double> v(x.size());
  GmmBackend(model).velocity(x, alpha_bar, v);
  return v;
}

std::vector<double> gmm_flow_velocity(std::span<const double> x, double t, const GaussianMixtureModel& model) {
  require(t > 0.0 && t < 1.0, ErrorCode::invalid_argument, "flow time must lie in (0, 1)");
  require(x.size() == model.dimension(), ErrorCode::invalid_argument, "dimension mismatch");
  check_finite(x, "x");
  std::vector<double> v(x.size());
  GmmBackend(model).flow_velocity(x, t, v);
  return v;
}

TiltedMoments analytic_tilted_moments(const GaussianMixtureModel& model, std::span<const double> a, double lambda) {
  const std::size_t D = model.dimension();
  require(a.size() == D, ErrorCode::invalid_argument, "coefficient dimension mismatch");
  require(lambda >= 0.0, ErrorCode::invalid_argument, "lambda must be >= 0");
  const auto& comps = model.components();
  std::vector<double> logw(comps.size());
  std::vector<Eigen::VectorXd> means(comps.size(), Eigen::VectorXd(D));
  for (std::size_t c = 0; c < comps.size(); ++c) {
    double amu = 0.0, asa = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      amu += a[d] * comps[c].mean[d];
      asa += a[d] * a[d] * comps[c].variance[d];
      means[c][static_cast<Eigen::Index>(d)] = comps[c].mean[d] + lambda * comps[c].variance[d] * a[d];
    }
    logw[c] = std::log(comps[c].weight) + lambda * amu + 0.5 * lambda * lambda * asa;
  }
  softmax_inplace(logw);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(D));
  for (std::size_t c = 0; c < comps.size(); ++c) m += logw[c] * means[c];
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Eigen::VectorXd dm = means[c] - m;
    cov += logw[c] * dm * dm.transpose();
    for (std::size_t d = 0; d < D; ++d) {
      cov(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) += logw[c] * comps[c].variance[d];
    }
  }
  return {std::vector<double>(m.data(), m.data() + m.size()), cov};
}

TiltedMoments analytic_tilted_moments(const GaussianMixtureModel& model, const RewardFn& reward, double lambda) {
  const auto* lin = dynamic_cast<const LinearReward*>(&reward);
  if (lin == nullptr) fail(ErrorCode::unsupported, "analytic tilting needs a linear reward");
  return analytic_tilted_moments(model, lin->coefficients(), lambda);
}

void VelocityModel::sample_noise(CounterRng& rng, std::span<double> out) const {
  for (double& v : out) v = rng.normal();
}

void FlowModel::sample_noise(CounterRng& rng, std::span<double> out) const {
  for (double& v : out) v = rng.normal();
}

void GmmBackend::velocity(std::span<const double> x, double ab, std::span<double> out) const {
  model_.posterior_mean_diffusion(x, ab, out);
  const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
  for (std::size_t d = 0; d < x.size(); ++d) out[d] = (sa * x[d] - out[d]) / sb;
}

void GmmBackend::flow_velocity(std::span<const double> x, double t, std::span<double> out) const {
  require(t > 0.0 && t <= 1.0, ErrorCode::invalid_argument, "flow time must lie in (0, 1]");
  std::vector<double> z(x.size());
  model_.posterior_means_flow(x, t, out, z);
  for (std::size_t d = 0; d < x.size(); ++d) out[d] = z[d] - out[d];
}

void GmmBackend::sample_noise(CounterRng& rng, std::span<double> out) const {
  for (double& v : out) v = rng.normal();
}

LatentMagnitudes LatentMagnitudes::from_json(const nlohmann::json& j) {
  LatentMagnitudes m;
  for (const auto& [key, value] : j.items()) {
    require(key == "rotation" || key == "translation" || key == "texture", ErrorCode::config,
            "unknown magnitude field '" + key + "'");
  }
  m.rotation = j.value("rotation", m.rotation);
  m.translation = j.value("translation", m.translation);
  m.texture = j.value("texture", m.texture);
  require(m.rotation >= 0 && m.translation >= 0 && m.texture >= 0, ErrorCode::config, "magnitudes must be >= 0");
  return m;
}

std::size_t scene_latent_dimension(const GroundTruthScene& scene) {
  return static_cast<std::size_t>(scene.frame_count()) * (6 + static_cast<std::size_t>(scene.spec.channels));
}

FrameStack scene_latent_decode(std::span<const double> latent, const GroundTruthScene& scene,
                               const LatentMagnitudes& magnitudes, const std::vector<int>& frames) {
  const std::size_t per = 6 + static_cast<std::size_t>(scene.spec.channels);
  require(latent.size() == scene_latent_dimension(scene), ErrorCode::invalid_argument,
          "latent dimension " + std::to_string(latent.size()) + " does not match scene (" +
              std::to_string(scene_latent_dimension(scene)) + ")");
  check_finite(latent, "latent");
  std::vector<int> which = frames;
  if (which.empty()) {
    for (int i = 0; i < scene.frame_count(); ++i) which.push_back(i);
  }
  FrameStack out;
  for (int i : which) {
    require(i >= 0 && i < scene.frame_count(), ErrorCode::invalid_argument, "frame index out of range");
    const double* z = latent.data() + static_cast<std::size_t>(i) * per;
    const CameraPose& nominal = scene.nominal_poses[static_cast<std::size_t>(i)];
    CameraPose pose = nominal;
    const Vec3 omega(z[0], z[1], z[2]);
    const Vec3 tau(z[3], z[4], z[5]);
    if (omega != Vec3::Zero() || tau != Vec3::Zero()) {
      const Mat3 Rd = axis_angle_to_matrix(omega * magnitudes.rotation);
      pose.rotation = Rd * nominal.rotation;
      pose.translation = Rd * nominal.translation + tau * magnitudes.translation;
    }
    FeatureMap frame = render_scene(scene, pose, i).frame;
    const int C = frame.channels();
    bool jitter = false;
    for (int c = 0; c < C; ++c) jitter = jitter || z[6 + c] != 0.0;
    if (jitter && magnitudes.texture != 0.0) {
      for (std::size_t p = 0; p < frame.pixels(); ++p) {
        double* f = frame.pixel(p);
        bool covered = false;
        for (int c = 0; c < C; ++c) covered = covered || f[c] != 0.0;
        if (!covered) continue;
        for (int c = 0; c < C; ++c) f[c] += magnitudes.texture * z[6 + c];
      }
    }
    out.indices.push_back(i);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

SceneEstimate3D OracleReconstructor::reconstruct_3d(const FrameStack& frames, const Intrinsics&) const {
  return oracle_reconstruct_3d(frames, *scene_, options_);
}

SceneEstimate4D OracleReconstructor::reconstruct_4d(const FrameStack& frames, const Intrinsics&) const {
  return oracle_reconstruct_4d(frames, *scene_, options_);
}

nlohmann::json OracleReconstructor::describe() const {
  return {{"type", "oracle"}, {"noise", options_.noise}, {"noise_seed", options_.noise_seed}};
}

SceneVideoBackend::SceneVideoBackend(std::shared_ptr<const GroundTruthScene> scene, LatentMagnitudes magnitudes)
    : scene_(std::move(scene)), magnitudes_(magnitudes) {
  require(scene_ != nullptr, ErrorCode::invalid_argument, "backend needs a scene");
  dim_ = scene_latent_dimension(*scene_);
}

void SceneVideoBackend::velocity(std::span<const double> x, double, std::span<double> out) const {
  require(x.size() == dim_ && out.size() == dim_, ErrorCode::invalid_argument, "dimension mismatch");
  std::fill(out.begin(), out.end(), 0.0);
}

void SceneVideoBackend::flow_velocity(std::span<const double> x, double t, std::span<double> out) const {
  require(x.size() == dim_ && out.size() == dim_, ErrorCode::invalid_argument, "dimension mismatch");
  // E[z - x0 | x_t] for x0, z ~ N(0, I): ((2t - 1) / ((1 - t)^2 + t^2)) x_t.
  const double k = (2.0 * t - 1.0) / ((1.0 - t) * (1.0 - t) + t * t);
  for (std::size_t d = 0; d < dim_; ++d) out[d] = k * x[d];
}

SceneReward::SceneReward(std::shared_ptr<const SceneVideoBackend> backend, std::shared_ptr<const Reconstructor> recon,
                         GeoRewardKind kind, GeoRewardConfig config)
    : backend_(std::move(backend)), recon_(std::move(recon)), kind_(kind), config_(config) {
  require(backend_ && recon_, ErrorCode::invalid_argument, "scene reward needs a backend and a reconstructor");
  selected_ = select_frames(backend_->scene().frame_count(), config_.recon_frames);
}

GeoScore SceneReward::score(std::span<const double> x) const {
  const GroundTruthScene& scene = backend_->scene();
  const FrameStack frames = scene_latent_decode(x, scene, backend_->magnitudes(), selected_);
  GeoRewardConfig cfg = config_;
  cfg.recon_frames = static_cast<int>(frames.size());
  if (kind_ == GeoRewardKind::gs) {
    return gs_met3r(frames, cfg, recon_->reconstruct_3d(frames, scene.intrinsics), scene.intrinsics);
  }
  return dyn_met3r(frames, cfg, recon_->reconstruct_4d(frames, scene.intrinsics), scene.intrinsics);
}

double SceneReward::evaluate(std::span<const double> x, EvalPhase) const { return score(x).score; }

nlohmann::json SceneReward::describe() const {
  return {{"type", kind_ == GeoRewardKind::gs ? "gs_met3r" : "dyn_met3r"},
          {"config", config_.to_json()},
          {"selected_frames", selected_},
          {"reconstructor", recon_->describe()}};
}

}  // namespace steerkit
