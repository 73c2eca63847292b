// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fuse_ser/gradcheck.hpp"
#include "fuse_ser/ops.hpp"
#include "fuse_ser/random.hpp"
#include "fuse_ser/tensor.hpp"
#include "support/test_support.hpp"

namespace fuse_ser {
namespace {

TEST(GradcheckTest, QuadraticExact) {
  Tensor64 x({3}, {1.0, -2.0, 0.5}, true);
  const auto r = check_gradients("square", {x}, [&] { return sum(mul(x, x)); });
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-8);
  EXPECT_EQ(r.probes, 3u);
}

TEST(GradcheckTest, DetectsWrongBackward) {
  detail::set_corrupt_backward_op("mul");
  Tensor64 x({3}, {1.0, -2.0, 0.5}, true);
  const auto r = check_gradients("square", {x}, [&] { return sum(mul(x, x)); });
  detail::set_corrupt_backward_op("");
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 1e-3);
}

TEST(GradcheckTest, ProbeLimit) {
  Rng rng(2);
  auto x = testing::random_tensor<double>(rng, {50}, 1.0, true);
  GradcheckOptions o;
  o.max_probes_per_leaf = 7;
  const auto r = check_gradients("probe", {x}, [&] { return sum(mul(x, x)); }, o);
  EXPECT_EQ(r.probes, 7u);
  EXPECT_TRUE(r.passed);
}

TEST(GradcheckSuiteTest, TinyPasses) {
  const auto results = run_gradcheck_suite(GradcheckScale::kTiny);
  EXPECT_GE(results.size(), 20u);
  double seconds = 0;
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " rel " << r.max_rel_error;
    EXPECT_LT(r.max_rel_error, 1e-3) << r.name;
    seconds += r.seconds;
  }
  EXPECT_LT(seconds, 120.0);
}

TEST(GradcheckSuiteTest, CorruptedReluFails) {
  detail::set_corrupt_backward_op("relu");
  const auto results = run_gradcheck_suite(GradcheckScale::kTiny);
  detail::set_corrupt_backward_op("");
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  EXPECT_GT(failed, 0u);
}

TEST(GradcheckSuiteTest, ParseScale) {
  EXPECT_EQ(parse_gradcheck_scale("tiny"), GradcheckScale::kTiny);
  EXPECT_EQ(parse_gradcheck_scale("default"), GradcheckScale::kDefault);
  EXPECT_ANY_THROW(parse_gradcheck_scale("huge"));
}

}  // namespace
}  // namespace fuse_ser
