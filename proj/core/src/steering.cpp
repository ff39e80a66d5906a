// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/steering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "steerkit/error.hpp"
#include "steerkit/parallel.hpp"
#include "steerkit/version.hpp"

namespace steerkit {
namespace {

constexpr std::uint64_t kRenoiseGeneration = 1ULL << 41;

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::numeric, std::string(what) + " contains a non-finite value");
  }
}

/// First error by particle index, rethrown with location.
class ErrorSlot {
 public:
  explicit ErrorSlot(std::size_t k) : errors_(k) {}

  template <class F>
  void run(std::size_t i, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      errors_[i] = std::make_pair(e.code(), std::string(e.what()));
    } catch (const std::exception& e) {
      errors_[i] = std::make_pair(ErrorCode::numeric, std::string(e.what()));
    }
  }

  void rethrow(int step) const {
    for (std::size_t i = 0; i < errors_.size(); ++i) {
      if (errors_[i]) {
        const std::string where = step == std::numeric_limits<int>::min() ? "init" : std::to_string(step);
        throw Error(errors_[i]->first, errors_[i]->second + " [particle " + std::to_string(i) + ", step " + where + "]");
      }
    }
  }

 private:
  std::vector<std::optional<std::pair<ErrorCode, std::string>>> errors_;
};

template <class T>
void permute(std::vector<T>& v, const std::vector<std::size_t>& anc) {
  std::vector<T> out;
  out.reserve(v.size());
  for (std::size_t a : anc) out.push_back(v[a]);
  v = std::move(out);
}

void permute_rows(std::vector<double>& v, std::size_t d, const std::vector<std::size_t>& anc) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < anc.size(); ++i) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(anc[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  v = std::move(out);
}

}  // namespace

std::string to_string(PotentialKind kind) { return kind == PotentialKind::max ? "max" : "difference"; }
std::string to_string(TerminalMode mode) { return mode == TerminalMode::argmax ? "argmax" : "resample"; }
std::string to_string(ProposalKernel kernel) {
  return kernel == ProposalKernel::ancestral ? "ancestral" : "deterministic";
}

PotentialKind parse_potential_kind(std::string_view name) {
  if (name == "max") return PotentialKind::max;
  if (name == "difference") return PotentialKind::difference;
  fail(ErrorCode::invalid_argument, "unknown potential '" + std::string(name) + "'");
}

TerminalMode parse_terminal_mode(std::string_view name) {
  if (name == "argmax") return TerminalMode::argmax;
  if (name == "resample") return TerminalMode::resample;
  fail(ErrorCode::invalid_argument, "unknown terminal mode '" + std::string(name) + "'");
}

ProposalKernel parse_proposal_kernel(std::string_view name) {
  if (name == "ancestral") return ProposalKernel::ancestral;
  if (name == "deterministic") return ProposalKernel::deterministic;
  fail(ErrorCode::invalid_argument, "unknown proposal kernel '" + std::string(name) + "'");
}

void PotentialConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument, "lambda must be finite and >= 0");
}

nlohmann::json PotentialConfig::to_json() const {
  return {{"lambda", lambda}, {"potential", to_string(kind)}, {"terminal", to_string(terminal)}};
}

std::vector<double> tweedie_estimate(std::span<const double> x, std::span<const double> v, double alpha_bar) {
  require(x.size() == v.size(), ErrorCode::invalid_argument, "x and v differ in shape");
  require(alpha_bar > 0.0 && alpha_bar <= 1.0, ErrorCode::invalid_argument, "alpha_bar must lie in (0, 1]");
  check_finite(x, "x");
  check_finite(v, "v");
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] - b * v[i];
  return out;
}

namespace {

struct StepCoefficients {
  double sa_to, sb_to, sa_from, sb_from;
};

StepCoefficients step_coefficients(const TimestepSchedule& s, int from_t, int to_t) {
  require(to_t < from_t, ErrorCode::invalid_argument, "proposal needs to_t < from_t");
  const double af = s.alpha_bar(from_t), at = s.alpha_bar(to_t);
  return {std::sqrt(at), std::sqrt(1.0 - at), std::sqrt(af), std::sqrt(1.0 - af)};
}

// Ancestral step: the posterior mean of x_to given (x_hat0, x_from) plus noise
// with the step variance beta = 1 - ab_from / ab_to. The mean carries the
// posterior-variance share; beta rather than the posterior variance keeps
// unit-variance data stationary. The final step to t = 0 is noise free.
struct AncestralCoefficients {
  double keep, sigma;
};

AncestralCoefficients ancestral_coefficients(const TimestepSchedule& s, int from_t, int to_t) {
  const double af = s.alpha_bar(from_t), at = s.alpha_bar(to_t);
  const double posterior = std::max((1.0 - at) / (1.0 - af) * (1.0 - af / at), 0.0);
  const double step = to_t == 0 ? 0.0 : std::max(1.0 - af / at, 0.0);
  return {std::sqrt(std::max(1.0 - at - posterior, 0.0)), std::sqrt(step)};
}

double eps_hat(double x_hat0, double x_prev, const StepCoefficients& c) {
  const double r = x_prev - c.sa_from * x_hat0;
  if (c.sb_from == 0.0) {
    if (r != 0.0) fail(ErrorCode::numeric, "noise direction undefined at alpha_bar = 1");
    return 0.0;
  }
  return r / c.sb_from;
}

}  // namespace

std::vector<double> proposal_step(std::span<const double> x_hat0, std::span<const double> x_prev,
                                  const TimestepSchedule& schedule, int from_t, int to_t) {
  require(x_hat0.size() == x_prev.size(), ErrorCode::invalid_argument, "shape mismatch");
  const StepCoefficients c = step_coefficients(schedule, from_t, to_t);
  std::vector<double> out(x_hat0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.sa_to * x_hat0[i] + c.sb_to * eps_hat(x_hat0[i], x_prev[i], c);
  return out;
}

std::vector<double> ancestral_step(std::span<const double> x_hat0, std::span<const double> x_prev,
                                   const TimestepSchedule& schedule, int from_t, int to_t, CounterRng& rng) {
  require(x_hat0.size() == x_prev.size(), ErrorCode::invalid_argument, "shape mismatch");
  const StepCoefficients c = step_coefficients(schedule, from_t, to_t);
  const AncestralCoefficients a = ancestral_coefficients(schedule, from_t, to_t);
  std::vector<double> out(x_hat0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = c.sa_to * x_hat0[i] + a.keep * eps_hat(x_hat0[i], x_prev[i], c) + a.sigma * rng.normal();
  }
  return out;
}

double log_potential(std::span<const double> history, double lambda) {
  require(!history.empty(), ErrorCode::invalid_argument, "potential needs a non-empty history");
  require(lambda >= 0.0, ErrorCode::invalid_argument, "lambda must be >= 0");
  const double m = *std::max_element(history.begin(), history.end());
  return lambda == 0.0 ? 0.0 : lambda * m;
}

double compute_potential(std::span<const double> history, double lambda) {
  return std::exp(log_potential(history, lambda));
}

double log_terminal_correction_from_logs(double final_reward, std::span<const double> log_potentials, double lambda) {
  double s = 0.0;
  for (double l : log_potentials) s += l;
  return lambda * final_reward - s;
}

double log_terminal_correction(double final_reward, std::span<const double> per_step_potentials, double lambda) {
  std::vector<double> logs;
  logs.reserve(per_step_potentials.size());
  for (double g : per_step_potentials) {
    if (!(g > 0.0) || !std::isfinite(g)) fail(ErrorCode::numeric, "potentials must be positive and finite");
    logs.push_back(std::log(g));
  }
  return log_terminal_correction_from_logs(final_reward, logs, lambda);
}

double terminal_correction(double final_reward, std::span<const double> per_step_potentials, double lambda) {
  return std::exp(log_terminal_correction(final_reward, per_step_potentials, lambda));
}

namespace {

double checked_total(std::span<const double> weights) {
  require(!weights.empty(), ErrorCode::degenerate_weights, "no weights");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::degenerate_weights, "weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) fail(ErrorCode::degenerate_weights, "weights sum to zero");
  return total;
}

}  // namespace

double ess(std::span<const double> weights) {
  const double total = checked_total(weights);
  double sq = 0.0;
  for (double w : weights) sq += (w / total) * (w / total);
  return 1.0 / sq;
}

std::vector<std::size_t> draw_ancestors(std::span<const double> weights, CounterRng& rng, std::size_t count) {
  checked_total(weights);
  std::vector<double> cum(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cum.begin());
  const double total = cum.back();
  std::size_t last_positive = weights.size() - 1;
  while (weights[last_positive] == 0.0) --last_positive;
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    out[i] = std::min(static_cast<std::size_t>(it - cum.begin()), last_positive);
  }
  return out;
}

std::vector<double> weights_from_logs(std::span<const double> log_weights) {
  require(!log_weights.empty(), ErrorCode::degenerate_weights, "no weights");
  double m = -std::numeric_limits<double>::infinity();
  for (double l : log_weights) {
    if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) {
      fail(ErrorCode::degenerate_weights, "log weight is NaN or +inf");
    }
    m = std::max(m, l);
  }
  if (!std::isfinite(m)) fail(ErrorCode::degenerate_weights, "all weights are zero");
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - m);
  return w;
}

ResampleResult multinomial_resample(const ParticleEnsemble& ensemble, std::span<const double> weights, CounterRng& rng) {
  require(weights.size() == ensemble.k(), ErrorCode::invalid_argument, "one weight per particle required");
  ResampleResult res;
  res.ancestors = draw_ancestors(weights, rng, ensemble.k());
  res.ensemble.current_step = ensemble.current_step;
  for (std::size_t i = 0; i < res.ancestors.size(); ++i) {
    Particle p = ensemble.particles[res.ancestors[i]];
    p.rng_stream = ensemble.particles[i].rng_stream;
    res.ensemble.particles.push_back(std::move(p));
  }
  return res;
}

std::size_t argmax_lowest(std::span<const double> values) {
  require(!values.empty(), ErrorCode::invalid_argument, "argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void ReverseProcess::renoise(int, std::span<const double>, std::span<double>, CounterRng&) const {}

void VPredictionProcess::initial(CounterRng& rng, std::span<double> x) const { model_.sample_noise(rng, x); }

void VPredictionProcess::transition(int t, std::span<const double> x_next, std::span<double> x_hat0,
                                    std::span<double> x_out, CounterRng& rng) const {
  const double ab = schedule_.alpha_bar(t + 1);
  model_.velocity(x_next, ab, x_out);  // x_out holds v until overwritten below
  const StepCoefficients c = step_coefficients(schedule_, t + 1, t);
  for (std::size_t i = 0; i < x_next.size(); ++i) x_hat0[i] = c.sa_from * x_next[i] - c.sb_from * x_out[i];
  if (kernel_ == ProposalKernel::deterministic) {
    for (std::size_t i = 0; i < x_next.size(); ++i) {
      x_out[i] = c.sa_to * x_hat0[i] + c.sb_to * eps_hat(x_hat0[i], x_next[i], c);
    }
    return;
  }
  const AncestralCoefficients a = ancestral_coefficients(schedule_, t + 1, t);
  for (std::size_t i = 0; i < x_next.size(); ++i) {
    x_out[i] = c.sa_to * x_hat0[i] + a.keep * eps_hat(x_hat0[i], x_next[i], c) + a.sigma * rng.normal();
  }
}

nlohmann::json VPredictionProcess::describe() const {
  return {{"sampler", "v_prediction"}, {"kernel", to_string(kernel_)}, {"schedule", schedule_.to_json()}};
}

void FlowProcess::initial(CounterRng& rng, std::span<double> x) const { model_.sample_noise(rng, x); }

void FlowProcess::transition(int t, std::span<const double> x_next, std::span<double> x_hat0, std::span<double> x_out,
                             CounterRng&) const {
  const double t_from = grid_.time_at(t + 1), t_to = grid_.time_at(t);
  model_.flow_velocity(x_next, t_from, x_out);
  for (std::size_t i = 0; i < x_next.size(); ++i) {
    const double v = x_out[i];
    x_hat0[i] = x_next[i] - t_from * v;
    x_out[i] = x_next[i] - (t_from - t_to) * v;
  }
}

void FlowProcess::renoise(int t, std::span<const double> x_hat0, std::span<double> x_out, CounterRng& rng) const {
  const double ti = grid_.time_at(t);
  for (std::size_t i = 0; i < x_hat0.size(); ++i) {
    const double z = rng.normal();
    x_out[i] = (1.0 - ti) * x_hat0[i] + ti * z;
  }
}

nlohmann::json FlowProcess::describe() const {
  return {{"sampler", "rectified_flow"}, {"renoise", renoise_}, {"grid", grid_.to_json()}};
}

SteerResult steer_process(const ReverseProcess& process, const RewardFn& reward, const ResamplingSchedule& resampling,
                          const PotentialConfig& potential, std::size_t k, std::uint64_t seed) {
  potential.validate();
  require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  require(k < kReservedStreamBase, ErrorCode::invalid_argument, "k too large");
  const std::size_t d = process.dimension();
  const int T = process.steps();
  require(reward.dimension() == d, ErrorCode::invalid_argument, "reward and process dimensions differ");
  require(resampling.steering_steps.empty() || resampling.total_steps == T, ErrorCode::invalid_argument,
          "resampling schedule was built for T=" + std::to_string(resampling.total_steps) + ", process has T=" +
              std::to_string(T));
  for (int s : resampling.steering_steps) {
    require(s >= 0 && s < T, ErrorCode::invalid_argument, "steering step outside [0, T)");
  }
  const double lambda = potential.lambda;

  std::vector<double> x(k * d), x_hat(k * d), x_new(k * d);
  const auto row = [d](std::vector<double>& v, std::size_t i) { return std::span<double>(v.data() + i * d, d); };

  {
    ErrorSlot errs(k);
    parallel_for(k, [&](std::size_t i) {
      errs.run(i, [&] {
        CounterRng rng(seed, i, kInitGeneration);
        process.initial(rng, row(x, i));
        check_finite(row(x, i), "initial state");
      });
    });
    errs.rethrow(std::numeric_limits<int>::min());
  }

  std::vector<double> running_max(k, -std::numeric_limits<double>::infinity());
  std::vector<double> last_reward(k, 0.0);
  std::vector<double> log_sum(k, 0.0);
  std::vector<StepTrace> traces;
  std::vector<double> rewards(k), logg(k);

  for (int t = T - 1; t >= 0; --t) {
    {
      ErrorSlot errs(k);
      parallel_for(k, [&](std::size_t i) {
        errs.run(i, [&] {
          CounterRng rng(seed, i, static_cast<std::uint64_t>(t));
          process.transition(t, row(x, i), row(x_hat, i), row(x_new, i), rng);
          check_finite(row(x_new, i), "state");
          check_finite(row(x_hat, i), "clean estimate");
        });
      });
      errs.rethrow(t);
    }
    if (resampling.contains(t)) {
      ErrorSlot errs(k);
      parallel_for(k, [&](std::size_t i) {
        errs.run(i, [&] {
          const double r = reward.evaluate(row(x_hat, i), EvalPhase::intermediate);
          if (!std::isfinite(r)) fail(ErrorCode::numeric, "reward is not finite");
          rewards[i] = r;
        });
      });
      errs.rethrow(t);
      for (std::size_t i = 0; i < k; ++i) {
        running_max[i] = std::max(running_max[i], rewards[i]);
        logg[i] = potential.kind == PotentialKind::max ? lambda * running_max[i] : lambda * (rewards[i] - last_reward[i]);
        last_reward[i] = rewards[i];
        log_sum[i] += logg[i];
      }
      StepTrace tr;
      tr.step = t;
      tr.rewards = rewards;
      tr.log_potentials = logg;
      tr.weights = weights_from_logs(logg);
      tr.ess = ess(tr.weights);
      CounterRng rrng(seed, kResampleStream, static_cast<std::uint64_t>(t));
      tr.ancestors = draw_ancestors(tr.weights, rrng, k);
      const double total = std::accumulate(tr.weights.begin(), tr.weights.end(), 0.0);
      for (double& w : tr.weights) w /= total;
      permute_rows(x_new, d, tr.ancestors);
      permute_rows(x_hat, d, tr.ancestors);
      permute(running_max, tr.ancestors);
      permute(last_reward, tr.ancestors);
      permute(log_sum, tr.ancestors);
      traces.push_back(std::move(tr));
      if (process.renoises()) {
        parallel_for(k, [&](std::size_t i) {
          CounterRng rng(seed, i, kRenoiseGeneration + static_cast<std::uint64_t>(t));
          process.renoise(t, row(x_hat, i), row(x_new, i), rng);
        });
      }
    }
    std::swap(x, x_new);
  }

  std::vector<double> final_rewards(k);
  {
    ErrorSlot errs(k);
    parallel_for(k, [&](std::size_t i) {
      errs.run(i, [&] {
        const double r = reward.evaluate(row(x, i), EvalPhase::final);
        if (!std::isfinite(r)) fail(ErrorCode::numeric, "final reward is not finite");
        final_rewards[i] = r;
      });
    });
    errs.rethrow(0);
  }

  // Lineage bookkeeping: slot -> originating slot per scored step.
  std::vector<std::size_t> origin(k);
  std::iota(origin.begin(), origin.end(), 0);
  std::vector<double> log_terminal(k);
  for (std::size_t i = 0; i < k; ++i) log_terminal[i] = lambda * final_rewards[i] - log_sum[i];

  if (potential.terminal == TerminalMode::resample && k > 1) {
    StepTrace tr;
    tr.step = -1;
    tr.rewards = final_rewards;
    tr.log_potentials = log_terminal;
    tr.weights = weights_from_logs(log_terminal);
    tr.ess = ess(tr.weights);
    CounterRng rrng(seed, kResampleStream, kTerminalGeneration);
    tr.ancestors = draw_ancestors(tr.weights, rrng, k);
    const double total = std::accumulate(tr.weights.begin(), tr.weights.end(), 0.0);
    for (double& w : tr.weights) w /= total;
    permute_rows(x, d, tr.ancestors);
    permute(running_max, tr.ancestors);
    permute(log_sum, tr.ancestors);
    permute(final_rewards, tr.ancestors);
    permute(log_terminal, tr.ancestors);
    origin = tr.ancestors;
    traces.push_back(std::move(tr));
  }

  SteerResult res;
  res.final_rewards = final_rewards;
  res.log_terminal = log_terminal;
  res.lineage_log_potentials.assign(k, {});
  res.ensemble_final.current_step = 0;
  res.ensemble_final.particles.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    Particle& p = res.ensemble_final.particles[j];
    p.state.assign(x.begin() + static_cast<std::ptrdiff_t>(j * d), x.begin() + static_cast<std::ptrdiff_t>((j + 1) * d));
    p.running_max = running_max[j];
    p.log_potential_sum = log_sum[j];
    p.rng_stream = j;
    // Walk back through the scored steps.
    std::size_t a = origin[j];
    std::vector<RewardRecord> hist;
    std::vector<double> logs;
    for (auto it = traces.rbegin(); it != traces.rend(); ++it) {
      if (it->step < 0) continue;
      a = it->ancestors[a];
      hist.push_back({it->step, it->rewards[a]});
      logs.push_back(it->log_potentials[a]);
    }
    std::reverse(hist.begin(), hist.end());
    std::reverse(logs.begin(), logs.end());
    p.reward_history = std::move(hist);
    res.lineage_log_potentials[j] = std::move(logs);
  }
  res.selected_index = argmax_lowest(final_rewards);
  res.selected = res.ensemble_final.particles[res.selected_index].state;
  res.selected_reward = final_rewards[res.selected_index];
  res.traces = std::move(traces);
  res.manifest = {{"tool", "steerkit"},
                  {"version", kVersion},
                  {"git", kGitStamp},
                  {"seed", seed},
                  {"particles", k},
                  {"process", process.describe()},
                  {"reward", reward.describe()},
                  {"resampling", resampling.to_json()},
                  {"potential", potential.to_json()}};
  return res;
}

SteerResult steer_v_prediction(const VelocityModel& backend, const RewardFn& reward, const TimestepSchedule& schedule,
                               const ResamplingSchedule& resampling, const PotentialConfig& potential, std::size_t k,
                               std::uint64_t seed, ProposalKernel kernel) {
  const VPredictionProcess process(backend, schedule, kernel);
  return steer_process(process, reward, resampling, potential, k, seed);
}

SteerResult steer_rectified_flow(const FlowModel& backend, const RewardFn& reward, const FlowTimeGrid& grid,
                                 const ResamplingSchedule& resampling, const PotentialConfig& potential, std::size_t k,
                                 std::uint64_t seed) {
  const FlowProcess process(backend, grid, true);
  return steer_process(process, reward, resampling, potential, k, seed);
}

SteerResult best_of_n(const ReverseProcess& process, const RewardFn& reward, std::size_t k, std::uint64_t seed) {
  PotentialConfig none;
  none.lambda = 0.0;
  SteerResult r = steer_process(process, reward, ResamplingSchedule::none(process.steps()), none, k, seed);
  r.manifest["baseline"] = "best_of_n";
  return r;
}

}  // namespace steerkit
