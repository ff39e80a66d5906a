// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerkit/backends.hpp"
#include "steerkit/rewards.hpp"
#include "steerkit/rng.hpp"
#include "steerkit/schedule.hpp"

namespace steerkit {

/// max: G_t = exp(lambda * running max of scored rewards).
/// difference: G_t = exp(lambda * (s_t - s_prev)) with s_prev = 0 at the first
/// scored step; the product over a path telescopes to exp(lambda * s_last).
enum class PotentialKind { max, difference };

/// argmax returns the best final particle and leaves the ensemble as is.
/// resample additionally redraws the ensemble with the terminal weights G_0.
enum class TerminalMode { argmax, resample };

/// deterministic: first-order solver step, eps re-derived from x_{t+1}.
/// ancestral: posterior mean given (x_hat0, x_{t+1}) plus noise of the step
/// variance 1 - ab_from / ab_to; the last step into t = 0 adds none.
enum class ProposalKernel { ancestral, deterministic };

std::string to_string(PotentialKind kind);
std::string to_string(TerminalMode mode);
std::string to_string(ProposalKernel kernel);
PotentialKind parse_potential_kind(std::string_view name);
TerminalMode parse_terminal_mode(std::string_view name);
ProposalKernel parse_proposal_kernel(std::string_view name);

struct PotentialConfig {
  double lambda = 10.0;
  PotentialKind kind = PotentialKind::max;
  TerminalMode terminal = TerminalMode::argmax;

  void validate() const;
  nlohmann::json to_json() const;
};

struct RewardRecord {
  int step = 0;
  double reward = 0.0;
};

struct Particle {
  std::vector<double> state;
  std::vector<RewardRecord> reward_history;
  double running_max = -std::numeric_limits<double>::infinity();
  /// Sum of log G_t along the particle's ancestral line.
  double log_potential_sum = 0.0;
  std::uint64_t rng_stream = 0;
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  int current_step = 0;

  std::size_t k() const noexcept { return particles.size(); }
};

// ---------------------------------------------------------------------------
// Single-step operations.

std::vector<double> tweedie_estimate(std::span<const double> x, std::span<const double> v, double alpha_bar);

std::vector<double> proposal_step(std::span<const double> x_hat0, std::span<const double> x_prev,
                                  const TimestepSchedule& schedule, int from_t, int to_t);

std::vector<double> ancestral_step(std::span<const double> x_hat0, std::span<const double> x_prev,
                                   const TimestepSchedule& schedule, int from_t, int to_t, CounterRng& rng);

double log_potential(std::span<const double> history, double lambda);
double compute_potential(std::span<const double> history, double lambda);

/// log of exp(lambda * r) / prod(potentials). Potentials must be positive.
double log_terminal_correction(double final_reward, std::span<const double> per_step_potentials, double lambda);
double terminal_correction(double final_reward, std::span<const double> per_step_potentials, double lambda);
/// Same quantity from log potentials.
double log_terminal_correction_from_logs(double final_reward, std::span<const double> log_potentials, double lambda);

/// (sum w)^2 / sum w^2.
double ess(std::span<const double> weights);

/// Indices of `count` i.i.d. categorical draws with probabilities weights / sum.
std::vector<std::size_t> draw_ancestors(std::span<const double> weights, CounterRng& rng, std::size_t count);

/// Weights from log weights, shifted so the largest is 1.
std::vector<double> weights_from_logs(std::span<const double> log_weights);

struct ResampleResult {
  ParticleEnsemble ensemble;
  std::vector<std::size_t> ancestors;
};

/// Copies receive the stream id of the slot they land in, so copies diverge.
ResampleResult multinomial_resample(const ParticleEnsemble& ensemble, std::span<const double> weights, CounterRng& rng);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

// ---------------------------------------------------------------------------
// Reverse processes.

/// One sampler: x_T from `initial`, then `transition` maps x_{t+1} to x_t for
/// t = T-1..0 and reports the clean estimate the reward scores.
class ReverseProcess {
 public:
  virtual ~ReverseProcess() = default;
  virtual std::size_t dimension() const = 0;
  virtual int steps() const = 0;
  virtual void initial(CounterRng& rng, std::span<double> x) const = 0;
  virtual void transition(int t, std::span<const double> x_next, std::span<double> x_hat0, std::span<double> x_out,
                          CounterRng& rng) const = 0;
  /// Processes that renoise replace x_t after a resampling step.
  virtual bool renoises() const { return false; }
  virtual void renoise(int t, std::span<const double> x_hat0, std::span<double> x_out, CounterRng& rng) const;
  virtual nlohmann::json describe() const = 0;
};

class VPredictionProcess final : public ReverseProcess {
 public:
  VPredictionProcess(const VelocityModel& model, const TimestepSchedule& schedule,
                     ProposalKernel kernel = ProposalKernel::ancestral)
      : model_(model), schedule_(schedule), kernel_(kernel) {}
  std::size_t dimension() const override { return model_.dimension(); }
  int steps() const override { return schedule_.total_steps(); }
  void initial(CounterRng& rng, std::span<double> x) const override;
  void transition(int t, std::span<const double> x_next, std::span<double> x_hat0, std::span<double> x_out,
                  CounterRng& rng) const override;
  nlohmann::json describe() const override;

 private:
  const VelocityModel& model_;
  const TimestepSchedule& schedule_;
  ProposalKernel kernel_;
};

/// Euler integration of a flow from t = 1 to 0. With `renoise`, resampled
/// estimates are pushed back to x_{t_i} = (1 - t_i) x_hat + t_i z.
class FlowProcess final : public ReverseProcess {
 public:
  FlowProcess(const FlowModel& model, const FlowTimeGrid& grid, bool renoise = true)
      : model_(model), grid_(grid), renoise_(renoise) {}
  std::size_t dimension() const override { return model_.dimension(); }
  int steps() const override { return grid_.steps(); }
  void initial(CounterRng& rng, std::span<double> x) const override;
  void transition(int t, std::span<const double> x_next, std::span<double> x_hat0, std::span<double> x_out,
                  CounterRng& rng) const override;
  bool renoises() const override { return renoise_; }
  void renoise(int t, std::span<const double> x_hat0, std::span<double> x_out, CounterRng& rng) const override;
  nlohmann::json describe() const override;

 private:
  const FlowModel& model_;
  const FlowTimeGrid& grid_;
  bool renoise_;
};

// ---------------------------------------------------------------------------
// Drivers.

struct StepTrace {
  int step = 0;  // -1 for the terminal resampling
  std::vector<double> rewards;
  std::vector<double> log_potentials;
  std::vector<double> weights;  // normalised
  double ess = 0.0;
  std::vector<std::size_t> ancestors;
};

struct SteerResult {
  std::vector<double> selected;
  std::size_t selected_index = 0;
  double selected_reward = 0.0;
  ParticleEnsemble ensemble_final;
  std::vector<double> final_rewards;
  /// Per final particle: log G_t along its ancestral line, in step order.
  std::vector<std::vector<double>> lineage_log_potentials;
  /// Per final particle: log G_0.
  std::vector<double> log_terminal;
  std::vector<StepTrace> traces;
  nlohmann::json manifest;
};

SteerResult steer_process(const ReverseProcess& process, const RewardFn& reward, const ResamplingSchedule& resampling,
                          const PotentialConfig& potential, std::size_t k, std::uint64_t seed);

SteerResult steer_v_prediction(const VelocityModel& backend, const RewardFn& reward, const TimestepSchedule& schedule,
                               const ResamplingSchedule& resampling, const PotentialConfig& potential, std::size_t k,
                               std::uint64_t seed, ProposalKernel kernel = ProposalKernel::ancestral);

SteerResult steer_rectified_flow(const FlowModel& backend, const RewardFn& reward, const FlowTimeGrid& grid,
                                 const ResamplingSchedule& resampling, const PotentialConfig& potential, std::size_t k,
                                 std::uint64_t seed);

/// k independent baseline runs of the process; the best final reward wins.
SteerResult best_of_n(const ReverseProcess& process, const RewardFn& reward, std::size_t k, std::uint64_t seed);

}  // namespace steerkit
