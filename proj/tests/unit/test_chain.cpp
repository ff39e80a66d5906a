// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "steerkit/chain.hpp"
#include "test_util.hpp"

namespace steerkit {
namespace {

TEST(Chain, BandedKernelsAreStochastic) {
  const QuantizedChain c = QuantizedChain::banded(64, 4);
  EXPECT_EQ(c.bins(), 64);
  EXPECT_EQ(c.steps(), 4);
  double ps = 0.0;
  for (double p : c.prior()) ps += p;
  EXPECT_NEAR(ps, 1.0, 1e-12);
  for (int t = 0; t < 4; ++t) {
    for (int r = 0; r < 64; ++r) {
      double s = 0.0;
      for (int k = 0; k < 64; ++k) {
        ASSERT_GE(c.kernel(t, r, k), 0.0);
        if (std::abs(k - r) > 4) ASSERT_EQ(c.kernel(t, r, k), 0.0);
        s += c.kernel(t, r, k);
      }
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Chain, CleanEstimateMatchesPathEnumeration) {
  const QuantizedChain c = QuantizedChain::banded(7, 3, 2);
  // Sum over every path x_t, ..., x_0 starting from bin j at t+1.
  std::function<double(int, int)> expect = [&](int t, int j) {
    double e = 0.0;
    for (int k = 0; k < c.bins(); ++k) {
      const double p = c.kernel(t, j, k);
      if (p == 0.0) continue;
      e += p * (t == 0 ? c.centers()[static_cast<std::size_t>(k)] : expect(t - 1, k));
    }
    return e;
  };
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < 7; ++j) EXPECT_NEAR(c.clean_estimate(t, j), expect(t, j), 1e-12) << t << " " << j;
  }
}

TEST(Chain, BinOfIsExactOnCentres) {
  const QuantizedChain c = QuantizedChain::banded(64, 2);
  for (int j = 0; j < 64; ++j) EXPECT_EQ(c.bin_of(c.centers()[static_cast<std::size_t>(j)]), j);
  EXPECT_ERROR_CODE(c.bin_of(0.001), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(c.bin_of(10.0), ErrorCode::invalid_argument);
}

TEST(Chain, Validation) {
  EXPECT_ERROR_CODE(QuantizedChain({0.0, 1.0}, {0.5, 0.5}, {{0.5, 0.4, 0.0, 1.0}}), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(QuantizedChain({1.0, 0.0}, {0.5, 0.5}, {{1, 0, 0, 1}}), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(QuantizedChain({0.0, 1.0}, {0.5, 0.5}, {}), ErrorCode::invalid_argument);
  EXPECT_ERROR_CODE(QuantizedChain::banded(1, 2), ErrorCode::invalid_argument);
}

TEST(Chain, TransitionFollowsKernel) {
  const QuantizedChain c = QuantizedChain::banded(9, 2, 2);
  const int from = 4;
  std::vector<int> counts(9, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(1, static_cast<std::uint64_t>(i), 0);
    std::vector<double> xh(1), out(1);
    c.transition(1, std::vector<double>{c.centers()[from]}, xh, out, rng);
    ASSERT_EQ(xh[0], c.clean_estimate(1, from));
    ++counts[static_cast<std::size_t>(c.bin_of(out[0]))];
  }
  for (int k = 0; k < 9; ++k) {
    const double p = c.kernel(1, from, k);
    EXPECT_LE(std::abs(counts[k] - n * p), 4 * std::sqrt(n * p * (1 - p)) + 1e-9) << k;
  }
}

}  // namespace
}  // namespace steerkit
