// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include "steerkit/chain.hpp"

#include <cmath>

#include "steerkit/error.hpp"

namespace steerkit {

QuantizedChain::QuantizedChain(std::vector<double> centers, std::vector<double> prior,
                               std::vector<std::vector<double>> kernels)
    : centers_(std::move(centers)), prior_(std::move(prior)), kernels_(std::move(kernels)) {
  const std::size_t n = centers_.size();
  require(n >= 2 && prior_.size() == n, ErrorCode::invalid_argument, "chain needs >= 2 bins and a matching prior");
  require(!kernels_.empty(), ErrorCode::invalid_argument, "chain needs >= 1 kernel");
  for (std::size_t j = 1; j < n; ++j) require(centers_[j] > centers_[j - 1], ErrorCode::invalid_argument, "centres must increase");
  for (const auto& K : kernels_) {
    require(K.size() == n * n, ErrorCode::invalid_argument, "kernel must be bins x bins");
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += K[r * n + c];
      require(std::abs(s - 1.0) < 1e-9, ErrorCode::invalid_argument, "kernel rows must sum to 1");
    }
  }
  // E[x0 | x_{t+1}] = (K_t K_{t-1} ... K_0) * centers.
  clean_.resize(kernels_.size());
  std::vector<double> m = centers_;
  for (std::size_t t = 0; t < kernels_.size(); ++t) {
    std::vector<double> next(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) next[r] += kernels_[t][r * n + c] * m[c];
    }
    m = next;
    clean_[t] = m;
  }
}

QuantizedChain QuantizedChain::banded(int bins, int T, int band) {
  require(bins >= 2 && T >= 1 && band >= 1, ErrorCode::invalid_argument, "invalid chain shape");
  const auto n = static_cast<std::size_t>(bins);
  std::vector<double> centers(n), prior(n);
  for (std::size_t j = 0; j < n; ++j) centers[j] = -3.0 + (static_cast<double>(j) + 0.5) * 6.0 / bins;
  double ps = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    prior[j] = std::exp(-0.5 * centers[j] * centers[j] / 2.25);
    ps += prior[j];
  }
  for (double& p : prior) p /= ps;
  const double width = 6.0 / bins;
  std::vector<std::vector<double>> kernels(static_cast<std::size_t>(T), std::vector<double>(n * n, 0.0));
  for (int t = 0; t < T; ++t) {
    const double contraction = 0.7 + 0.05 * t;
    const double offset = 0.15 * std::sin(1.0 + t);
    for (std::size_t r = 0; r < n; ++r) {
      const double target = contraction * centers[r] + offset;
      double s = 0.0;
      for (int dj = -band; dj <= band; ++dj) {
        const long c = static_cast<long>(r) + dj;
        if (c < 0 || c >= bins) continue;
        const double z = (centers[static_cast<std::size_t>(c)] - target) / (2.0 * width);
        const double w = std::exp(-0.5 * z * z) + 1e-3;
        kernels[static_cast<std::size_t>(t)][r * n + static_cast<std::size_t>(c)] = w;
        s += w;
      }
      for (std::size_t c = 0; c < n; ++c) kernels[static_cast<std::size_t>(t)][r * n + c] /= s;
    }
  }
  return QuantizedChain(std::move(centers), std::move(prior), std::move(kernels));
}

int QuantizedChain::bin_of(double x) const {
  const double lo = centers_.front(), hi = centers_.back();
  const double pos = (x - lo) / (hi - lo) * (bins() - 1);
  const long j = std::lround(pos);
  require(j >= 0 && j < bins() && std::abs(centers_[static_cast<std::size_t>(j)] - x) < 1e-9,
          ErrorCode::invalid_argument, "state is not a bin centre");
  return static_cast<int>(j);
}

int QuantizedChain::sample_row(const std::vector<double>& probs, std::size_t offset, CounterRng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (int c = 0; c < bins(); ++c) {
    const double p = probs[offset + static_cast<std::size_t>(c)];
    if (p <= 0.0) continue;
    last = c;
    acc += p;
    if (u < acc) return c;
  }
  return last;
}

void QuantizedChain::initial(CounterRng& rng, std::span<double> x) const {
  x[0] = centers_[static_cast<std::size_t>(sample_row(prior_, 0, rng))];
}

void QuantizedChain::transition(int t, std::span<const double> x_next, std::span<double> x_hat0,
                                std::span<double> x_out, CounterRng& rng) const {
  const int j = bin_of(x_next[0]);
  x_hat0[0] = clean_estimate(t, j);
  const auto n = static_cast<std::size_t>(bins());
  x_out[0] = centers_[static_cast<std::size_t>(sample_row(kernels_[static_cast<std::size_t>(t)], static_cast<std::size_t>(j) * n, rng))];
}

nlohmann::json QuantizedChain::describe() const {
  return {{"sampler", "quantized_chain"}, {"bins", bins()}, {"steps", steps()}};
}

}  // namespace steerkit
