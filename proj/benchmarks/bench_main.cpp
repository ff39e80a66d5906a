// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

// Own main: the distribution's benchmark_main archive carries LTO bytecode
// from another compiler release and cannot be linked.
#include <benchmark/benchmark.h>

BENCHMARK_MAIN();
