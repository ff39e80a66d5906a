// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "steerkit/config.hpp"

namespace steerkit {

inline constexpr const char* kBenchCsvHeader = "suite,setting,seed,metric,value";

/// One CSV row. Summary rows carry seed "all".
struct BenchRow {
  std::string setting;
  std::string seed;
  std::string metric;
  double value = 0.0;
};

struct BenchReport {
  std::string suite;
  std::vector<BenchRow> rows;
  nlohmann::json manifest;

  /// Per-seed values of a metric for a setting, in row order.
  std::vector<double> values(const std::string& setting, const std::string& metric) const;
  /// Value of the summary row; throws invalid_argument when absent.
  double summary(const std::string& setting, const std::string& metric) const;
};

/// Suites: convergence, scaling, schedule, prop1, bon. Parameters come from
/// config.bench; seeds are config.seed + i.
BenchReport run_bench(const std::string& suite, const RunConfig& config);

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report);

// Statistics shared with the acceptance harness.

struct Mixture1D {
  std::vector<double> weights, means, variances;
  double cdf(double x) const;
  double mean() const;
  double variance() const;
};

/// Exact tilt of a 1-D mixture by exp(lambda * a * x).
Mixture1D tilted_mixture_1d(const GaussianMixtureModel& model, double a, double lambda);

/// Total variation between the empirical distribution of `samples` and
/// `target`, over `bins` equal bins on mean ± 4 sd plus two tail bins.
double binned_tv(const std::vector<double>& samples, const Mixture1D& target, int bins);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// One particle of the final ensemble, chosen uniformly by a stream
/// independent of the run's own draws.
std::size_t uniform_member(const SteerResult& result, std::uint64_t seed);

}  // namespace steerkit
