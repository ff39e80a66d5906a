// Copyright 2026 The SteerKit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include "steerkit/error.hpp"

// Asserts that `stmt` throws steerkit::Error with the given code.
#define EXPECT_ERROR_CODE(stmt, expected_code)                                             \
  do {                                                                                     \
    bool thrown_ = false;                                                                  \
    try {                                                                                  \
      (void)(stmt);                                                                        \
    } catch (const ::steerkit::Error& e_) {                                                \
      thrown_ = true;                                                                      \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                                    \
    }                                                                                      \
    EXPECT_TRUE(thrown_) << #stmt " did not throw";                                        \
  } while (0)
