// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace steerkit {

/// Worker cap. Initialised from STEERKIT_THREADS when set, otherwise the
/// hardware concurrency. Results never depend on this value.
int worker_threads();

/// Overrides the worker cap for the calling process. n <= 0 restores the default.
void set_worker_threads(int n);

/// Runs body(i) for i in [0, n). Every index is visited exactly once; bodies
/// must only write state owned by their index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace steerkit
