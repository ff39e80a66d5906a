// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "steerkit/steering.hpp"

namespace steerkit {

/// Finite-state reverse chain on a 1D grid of bin centres. Kernel t maps the
/// state at t+1 (row) to the state at t (column); rows sum to 1. The clean
/// estimate from state j at t+1 is E[x0 | x_{t+1} = j] under the chain.
class QuantizedChain final : public ReverseProcess {
 public:
  QuantizedChain(std::vector<double> centers, std::vector<double> prior, std::vector<std::vector<double>> kernels);

  /// Contracting banded random walk: `bins` centres on [-3, 3], band +-`band` bins.
  static QuantizedChain banded(int bins, int T, int band = 4);

  std::size_t dimension() const override { return 1; }
  int steps() const override { return static_cast<int>(kernels_.size()); }
  void initial(CounterRng& rng, std::span<double> x) const override;
  void transition(int t, std::span<const double> x_next, std::span<double> x_hat0, std::span<double> x_out,
                  CounterRng& rng) const override;
  nlohmann::json describe() const override;

  int bins() const noexcept { return static_cast<int>(centers_.size()); }
  const std::vector<double>& centers() const noexcept { return centers_; }
  const std::vector<double>& prior() const noexcept { return prior_; }
  double kernel(int t, int from, int to) const { return kernels_[static_cast<std::size_t>(t)][static_cast<std::size_t>(from * bins() + to)]; }
  double clean_estimate(int t, int from) const { return clean_[static_cast<std::size_t>(t)][static_cast<std::size_t>(from)]; }
  /// Bin index of a state value; exact for bin centres.
  int bin_of(double x) const;

 private:
  int sample_row(const std::vector<double>& probs, std::size_t offset, CounterRng& rng) const;

  std::vector<double> centers_;
  std::vector<double> prior_;
  std::vector<std::vector<double>> kernels_;  // T flattened bins x bins matrices
  std::vector<std::vector<double>> clean_;    // clean_[t][j] = E[x0 | x_{t+1} = j]
};

}  // namespace steerkit
