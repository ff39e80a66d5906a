// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "steerkit/error.hpp"
#include "steerkit/rng.hpp"
#include "steerkit/version.hpp"

namespace steerkit {
namespace {

using nlohmann::json;

inline constexpr std::uint64_t kMemberStream = kReservedStreamBase + 2;

struct BenchParams {
  int seeds = 30;
  std::vector<std::size_t> ks{1, 2, 4, 8};
  std::vector<std::string> modes{"early", "linear", "late"};
  std::vector<double> etas{0.0, 0.05, 0.1, 0.2};
  std::vector<int> runs{100, 500, 2000};
  int bins = 40;
  std::string pool = "ensemble";  // ensemble | uniform

  static BenchParams from(const json& j, const std::string& suite) {
    BenchParams p;
    if (suite == "prop1") p.runs = {500};
    static const std::set<std::string> allowed{"seeds", "ks", "modes", "etas", "runs", "bins", "pool"};
    for (const auto& [key, value] : j.items()) {
      if (!allowed.count(key)) fail(ErrorCode::config, "unknown bench field '" + key + "'");
    }
    try {
      p.seeds = j.value("seeds", p.seeds);
      p.ks = j.value("ks", p.ks);
      p.modes = j.value("modes", p.modes);
      p.etas = j.value("etas", p.etas);
      p.runs = j.value("runs", p.runs);
      p.bins = j.value("bins", p.bins);
      p.pool = j.value("pool", p.pool);
    } catch (const json::exception& e) {
      fail(ErrorCode::config, std::string("malformed bench parameters: ") + e.what());
    }
    if (p.seeds < 1) fail(ErrorCode::config, "bench seeds must be >= 1");
    if (p.bins < 1) fail(ErrorCode::config, "bench bins must be >= 1");
    if (p.runs.empty() || *std::min_element(p.runs.begin(), p.runs.end()) < 1) fail(ErrorCode::config, "bench runs must be >= 1");
    for (std::size_t k : p.ks) {
      if (k < 1) fail(ErrorCode::config, "bench ks must be >= 1");
    }
    for (double e : p.etas) {
      if (!(e >= 0)) fail(ErrorCode::config, "bench etas must be >= 0");
    }
    if (p.pool != "ensemble" && p.pool != "uniform") fail(ErrorCode::config, "bench pool must be ensemble or uniform");
    return p;
  }

  json to_json() const {
    return {{"seeds", seeds}, {"ks", ks}, {"modes", modes}, {"etas", etas}, {"runs", runs}, {"bins", bins}, {"pool", pool}};
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void require_linear_gmm(const RunConfig& c, const std::string& suite) {
  if (c.backend.type != "gmm" || c.reward.type != "linear") {
    fail(ErrorCode::config, suite + " needs the gmm backend with a linear reward");
  }
}

/// Per-seed selected rewards of one configuration.
std::vector<double> selected_rewards(const RunConfig& c, const RunContext& ctx, int seeds) {
  std::vector<double> out;
  for (int i = 0; i < seeds; ++i) out.push_back(execute(c, ctx, c.seed + static_cast<std::uint64_t>(i)).selected_reward);
  return out;
}

void add_per_seed(BenchReport& r, const RunConfig& c, const std::string& setting, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    r.rows.push_back({setting, std::to_string(c.seed + i), "final_reward", values[i]});
  }
  r.rows.push_back({setting, "all", "mean_final_reward", mean_of(values)});
}

BenchReport bench_scaling(const RunConfig& config, const BenchParams& p) {
  BenchReport r;
  std::vector<double> means;
  for (std::size_t k : p.ks) {
    RunConfig c = config;
    c.steering.particles = k;
    const auto ctx = build_context(c);
    const std::vector<double> v = selected_rewards(c, *ctx, p.seeds);
    add_per_seed(r, c, "k=" + std::to_string(k), v);
    means.push_back(mean_of(v));
  }
  r.rows.push_back({"all", "all", "non_decreasing", std::is_sorted(means.begin(), means.end()) ? 1.0 : 0.0});
  return r;
}

BenchReport bench_schedule(const RunConfig& config, const BenchParams& p) {
  BenchReport r;
  for (const std::string& mode : p.modes) {
    RunConfig c = config;
    c.steering.method = "steer";
    c.steering.mode = parse_resampling_mode(mode);
    const auto ctx = build_context(c);
    add_per_seed(r, c, mode, selected_rewards(c, *ctx, p.seeds));
  }
  return r;
}

BenchReport bench_bon(const RunConfig& config, const BenchParams& p) {
  BenchReport r;
  std::vector<std::vector<double>> by_method;
  for (const char* method : {"steer", "best_of_n"}) {
    RunConfig c = config;
    c.steering.method = method;
    const auto ctx = build_context(c);
    by_method.push_back(selected_rewards(c, *ctx, p.seeds));
    add_per_seed(r, c, method, by_method.back());
  }
  std::vector<double> diff(by_method[0].size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = by_method[0][i] - by_method[1][i];
  r.rows.push_back({"steer-best_of_n", "all", "mean_paired_difference", mean_of(diff)});
  return r;
}

BenchReport bench_convergence(const RunConfig& config, const BenchParams& p) {
  require_linear_gmm(config, "convergence");
  BenchReport r;
  const auto ctx = build_context(config);
  const TiltedMoments target = analytic_tilted_moments(*config.backend.gmm, config.reward.coefficients,
                                                       config.steering.potential.lambda);
  const std::size_t d = target.mean.size();
  const int max_runs = *std::max_element(p.runs.begin(), p.runs.end());
  std::vector<std::vector<double>> draws;
  for (int i = 0; i < max_runs; ++i) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(i);
    const SteerResult res = execute(config, *ctx, seed);
    draws.push_back(res.ensemble_final.particles[uniform_member(res, seed)].state);
  }
  double worst = 0.0;
  for (int n : p.runs) {
    double mean_err = 0.0, var_err = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double m = 0.0;
      for (int i = 0; i < n; ++i) m += draws[static_cast<std::size_t>(i)][c];
      m /= n;
      double v = 0.0;
      for (int i = 0; i < n; ++i) v += (draws[static_cast<std::size_t>(i)][c] - m) * (draws[static_cast<std::size_t>(i)][c] - m);
      v /= std::max(1, n - 1);
      mean_err = std::max(mean_err, std::abs(m - target.mean[c]));
      var_err = std::max(var_err, std::abs(v - target.covariance(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c))));
    }
    const std::string setting = "runs=" + std::to_string(n);
    r.rows.push_back({setting, std::to_string(config.seed), "abs_mean_error", mean_err});
    r.rows.push_back({setting, std::to_string(config.seed), "abs_var_error", var_err});
    worst = std::max(worst, mean_err);
  }
  r.rows.push_back({"all", "all", "max_abs_mean_error", worst});
  return r;
}

BenchReport bench_prop1(const RunConfig& config, const BenchParams& p) {
  require_linear_gmm(config, "prop1");
  if (config.reward.coefficients.size() != 1) fail(ErrorCode::config, "prop1 needs a 1-D backend");
  BenchReport r;
  const double lambda = config.steering.potential.lambda;
  const Mixture1D target = tilted_mixture_1d(*config.backend.gmm, config.reward.coefficients[0], lambda);
  const int runs = p.runs.front();
  std::vector<double> le, tv;
  for (double eta : p.etas) {
    RunConfig c = config;
    c.reward.perturb_eta = eta;
    const auto ctx = build_context(c);
    std::vector<double> samples;
    for (int i = 0; i < runs; ++i) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
      const SteerResult res = execute(c, *ctx, seed);
      if (p.pool == "uniform") {
        samples.push_back(res.ensemble_final.particles[uniform_member(res, seed)].state[0]);
      } else {
        for (const Particle& q : res.ensemble_final.particles) samples.push_back(q.state[0]);
      }
    }
    const std::string setting = "eta=" + fmt(eta);
    le.push_back(lambda * eta);
    tv.push_back(binned_tv(samples, target, p.bins));
    r.rows.push_back({setting, std::to_string(c.seed), "lambda_eta", le.back()});
    r.rows.push_back({setting, std::to_string(c.seed), "tv", tv.back()});
  }
  r.rows.push_back({"all", "all", "spearman", spearman(le, tv)});
  return r;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) r[order[q]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::vector<double> BenchReport::values(const std::string& setting, const std::string& metric) const {
  std::vector<double> out;
  for (const BenchRow& row : rows) {
    if (row.setting == setting && row.metric == metric && row.seed != "all") out.push_back(row.value);
  }
  return out;
}

double BenchReport::summary(const std::string& setting, const std::string& metric) const {
  for (const BenchRow& row : rows) {
    if (row.setting == setting && row.metric == metric && row.seed == "all") return row.value;
  }
  fail(ErrorCode::invalid_argument, "no summary row " + setting + "/" + metric);
}

BenchReport run_bench(const std::string& suite, const RunConfig& config) {
  const BenchParams p = BenchParams::from(config.bench, suite);
  BenchReport r;
  if (suite == "scaling") {
    r = bench_scaling(config, p);
  } else if (suite == "schedule") {
    r = bench_schedule(config, p);
  } else if (suite == "bon") {
    r = bench_bon(config, p);
  } else if (suite == "convergence") {
    r = bench_convergence(config, p);
  } else if (suite == "prop1") {
    r = bench_prop1(config, p);
  } else {
    fail(ErrorCode::config, "unknown bench suite '" + suite + "'");
  }
  r.suite = suite;
  r.manifest = {{"tool", "steerkit"}, {"version", kVersion},       {"git", kGitStamp},
                {"command", "bench"}, {"suite", suite},           {"csv_schema", kBenchCsvHeader},
                {"params", p.to_json()}, {"config", config.to_json()}};
  return r;
}

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::config, "cannot write " + path.string());
  f << kBenchCsvHeader << '\n';
  for (const BenchRow& row : report.rows) {
    f << report.suite << ',' << row.setting << ',' << row.seed << ',' << row.metric << ',' << fmt(row.value) << '\n';
  }
}

double Mixture1D::cdf(double x) const {
  double c = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) c += weights[i] * normal_cdf((x - means[i]) / std::sqrt(variances[i]));
  return c;
}

double Mixture1D::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) m += weights[i] * means[i];
  return m;
}

double Mixture1D::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) v += weights[i] * (variances[i] + (means[i] - m) * (means[i] - m));
  return v;
}

Mixture1D tilted_mixture_1d(const GaussianMixtureModel& model, double a, double lambda) {
  require(model.dimension() == 1, ErrorCode::invalid_argument, "tilted_mixture_1d needs a 1-D model");
  Mixture1D m;
  std::vector<double> logw;
  for (const GaussianComponent& c : model.components()) {
    const double mu = c.mean[0], s2 = c.variance[0], la = lambda * a;
    logw.push_back(std::log(c.weight) + la * mu + 0.5 * la * la * s2);
    m.means.push_back(mu + la * s2);
    m.variances.push_back(s2);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double& w : logw) z += (w = std::exp(w - top));
  for (double w : logw) m.weights.push_back(w / z);
  return m;
}

double binned_tv(const std::vector<double>& samples, const Mixture1D& target, int bins) {
  require(!samples.empty() && bins >= 1, ErrorCode::invalid_argument, "binned_tv needs samples and bins");
  const double sd = std::sqrt(target.variance());
  const double lo = target.mean() - 4.0 * sd, hi = target.mean() + 4.0 * sd;
  const double width = (hi - lo) / bins;
  // Slot 0 is (-inf, lo), slot bins + 1 is [hi, inf).
  std::vector<double> counts(static_cast<std::size_t>(bins) + 2, 0.0);
  for (double s : samples) {
    std::size_t slot;
    if (s < lo) {
      slot = 0;
    } else if (s >= hi) {
      slot = static_cast<std::size_t>(bins) + 1;
    } else {
      slot = 1 + std::min(static_cast<std::size_t>((s - lo) / width), static_cast<std::size_t>(bins) - 1);
    }
    counts[slot] += 1.0;
  }
  double tv = 0.0, prev = 0.0;
  for (std::size_t slot = 0; slot < counts.size(); ++slot) {
    const double edge = slot == counts.size() - 1 ? 1.0 : target.cdf(lo + width * static_cast<double>(slot));
    tv += std::abs(counts[slot] / static_cast<double>(samples.size()) - (edge - prev));
    prev = edge;
  }
  return 0.5 * tv;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_argument, "spearman needs two equal series");
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::size_t uniform_member(const SteerResult& result, std::uint64_t seed) {
  const std::size_t k = result.ensemble_final.k();
  require(k > 0, ErrorCode::invalid_argument, "empty ensemble");
  CounterRng rng(seed, kMemberStream, 0);
  return std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(k)), k - 1);
}

}  // namespace steerkit
