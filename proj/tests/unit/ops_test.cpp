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
#include <vector>

#include "fuse_ser/error.hpp"
#include "fuse_ser/gradcheck.hpp"
#include "fuse_ser/ops.hpp"
#include "fuse_ser/random.hpp"
#include "support/test_support.hpp"

namespace fuse_ser {
namespace {

using testing::random_tensor;
using testing::to_vector;

// Direct seven-loop cross-correlation.
std::vector<double> conv_oracle(const Tensor64& x, const Tensor64& w, const Tensor64& b, const Conv2dOptions& o) {
  const auto n = x.dim(0), ci = x.dim(1), t = x.dim(2), f = x.dim(3);
  const auto co = w.dim(0), kt = w.dim(2), kf = w.dim(3);
  const std::size_t to = (t + 2 * o.pad_t - kt) / o.stride_t + 1;
  const std::size_t fo = (f + 2 * o.pad_f - kf) / o.stride_f + 1;
  std::vector<double> out(n * co * to * fo);
  auto X = x.data();
  auto W = w.data();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t i = 0; i < to; ++i)
        for (std::size_t j = 0; j < fo; ++j) {
          double acc = b.data()[c];
          for (std::size_t d = 0; d < ci; ++d)
            for (std::size_t u = 0; u < kt; ++u)
              for (std::size_t v = 0; v < kf; ++v) {
                const long ti = static_cast<long>(i * o.stride_t + u) - static_cast<long>(o.pad_t);
                const long fj = static_cast<long>(j * o.stride_f + v) - static_cast<long>(o.pad_f);
                if (ti < 0 || fj < 0 || ti >= static_cast<long>(t) || fj >= static_cast<long>(f)) continue;
                acc += X[((a * ci + d) * t + ti) * f + fj] * W[((c * ci + d) * kt + u) * kf + v];
              }
          out[((a * co + c) * to + i) * fo + j] = acc;
        }
  return out;
}

TEST(Conv2dTest, IdentityKernel) {
  Rng rng(1);
  auto x = random_tensor<float>(rng, {2, 1, 5, 4});
  Tensor w({1, 1, 1, 1}, {1.0f});
  Tensor b({1}, {0.0f});
  auto y = conv2d(x, w, b, {.pad_t = 0, .pad_f = 0});
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(to_vector(y), to_vector(x));
}

TEST(Conv2dTest, HandEvaluatedSum) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor b({1}, {0});
  auto y = conv2d(x, w, b, {.pad_t = 0, .pad_f = 0});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.data()[0], 5.0f);
}

TEST(Conv2dTest, MatchesDirectLoopsOnRandomShapes) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(2), ci = 1 + rng.below(3), co = 1 + rng.below(4);
    const std::size_t t = 3 + rng.below(6), f = 3 + rng.below(6);
    const std::size_t k = 1 + rng.below(3);
    Conv2dOptions o{.stride_t = 1 + rng.below(2), .stride_f = 1 + rng.below(2), .pad_t = rng.below(2),
                    .pad_f = rng.below(2)};
    auto x = random_tensor<double>(rng, {n, ci, t, f});
    auto w = random_tensor<double>(rng, {co, ci, k, k});
    auto b = random_tensor<double>(rng, {co});
    const auto y = conv2d(x, w, b, o);
    const auto ref = conv_oracle(x, w, b, o);
    ASSERT_EQ(y.numel(), ref.size());
    EXPECT_EQ(y.dim(2), (t + 2 * o.pad_t - k) / o.stride_t + 1);
    EXPECT_EQ(y.dim(3), (f + 2 * o.pad_f - k) / o.stride_f + 1);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
  }
}

TEST(Conv2dTest, ShapeErrorsNameTheAxis) {
  Tensor x({1, 2, 4, 4});
  Tensor w({3, 1, 3, 3});
  Tensor b({3});
  try {
    conv2d(x, w, b);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "C_in");
  }
  Tensor w5({1, 2, 7, 3});
  Tensor b1({1});
  try {
    conv2d(x, w5, b1);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "T");
  }
}

TEST(Conv2dTest, Gradcheck) {
  Rng rng(2);
  auto x = random_tensor<double>(rng, {2, 2, 5, 5}, 1.0, true);
  auto w = random_tensor<double>(rng, {3, 2, 3, 3}, 0.5, true);
  auto b = random_tensor<double>(rng, {3}, 0.5, true);
  const auto r = check_gradients("conv2d", {x, w, b}, [&] { return sum(conv2d(x, w, b)); });
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(BatchNormTest, ConstantChannelGivesZeros) {
  Tensor x = Tensor::full({2, 1, 3, 3}, 4.0f);
  Tensor g({1}, {1.0f}), b({1}, {0.0f});
  BatchNormState<float> st(1);
  auto y = batchnorm2d(x, g, b, st, Mode::kTrain);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BatchNormTest, ClosedFormTwoValues) {
  Tensor64 x({2, 1, 1, 1}, {0.0, 2.0});
  Tensor64 g({1}, {1.0}), b({1}, {3.0});
  BatchNormState<double> st(1);
  auto y = batchnorm2d(x, g, b, st, Mode::kTrain);
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.data()[0], 3.0 - s, 1e-12);
  EXPECT_NEAR(y.data()[1], 3.0 + s, 1e-12);
  // Running statistics: momentum 0.1, unbiased batch variance 2.
  EXPECT_NEAR(st.running_mean[0], 0.1, 1e-12);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 2.0, 1e-12);
  EXPECT_EQ(st.updates, 1u);
}

TEST(BatchNormTest, EvalUsesRunningStatistics) {
  Tensor64 x({1, 1, 1, 2}, {1.0, 3.0});
  Tensor64 g({1}, {2.0}), b({1}, {0.5});
  BatchNormState<double> st(1);
  st.running_mean = {1.0};
  st.running_var = {4.0};
  st.updates = 1;
  auto y = batchnorm2d(x, g, b, st, Mode::kEval);
  EXPECT_NEAR(y.data()[0], 0.5, 1e-12);
  EXPECT_NEAR(y.data()[1], 0.5 + 2.0 * 2.0 / std::sqrt(4.0 + 1e-5), 1e-12);
  EXPECT_EQ(st.updates, 1u);
}

TEST(BatchNormTest, EvalBeforeTrainingIsUninitialized) {
  Tensor x({1, 1, 2, 2});
  Tensor g({1}, {1.0f}), b({1}, {0.0f});
  BatchNormState<float> st(1);
  EXPECT_THROW(batchnorm2d(x, g, b, st, Mode::kEval), UninitializedError);
}

TEST(BatchNormTest, TrainNeedsTwoValuesPerChannel) {
  Tensor x({1, 1, 1, 1}, {1.0f});
  Tensor g({1}, {1.0f}), b({1}, {0.0f});
  BatchNormState<float> st(1);
  EXPECT_THROW(batchnorm2d(x, g, b, st, Mode::kTrain), DimensionError);
}

TEST(BatchNormTest, Gradcheck) {
  Rng rng(5);
  auto x = random_tensor<double>(rng, {3, 2, 3, 3}, 1.0, true);
  auto g = random_tensor<double>(rng, {2}, 1.0, true);
  auto b = random_tensor<double>(rng, {2}, 1.0, true);
  std::vector<double> wts(x.numel());
  for (auto& v : wts) v = rng.normal();
  BatchNormState<double> st(2);
  const auto r = check_gradients("bn", {x, g, b}, [&] {
    return weighted_sum(batchnorm2d(x, g, b, st, Mode::kTrain), std::span<const double>(wts));
  });
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(ReluTest, Definition) {
  Tensor64 x({3}, {-1.0, 0.0, 2.0}, true);
  auto y = relu(x);
  EXPECT_EQ(to_vector(y), (std::vector<double>{0.0, 0.0, 2.0}));
  backward(sum(y));
  EXPECT_EQ(x.grad()[1], 0.0);  // subgradient at 0
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(ReluTest, AllNegative) {
  Tensor64 x({4}, {-1.0, -2.0, -0.5, -3.0}, true);
  auto y = relu(x);
  backward(sum(y));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(ReluTest, PropagatesNan) {
  Tensor x({2}, {std::nanf(""), 1.0f});
  auto y = relu(x);
  EXPECT_TRUE(std::isnan(y.data()[0]));
  EXPECT_EQ(y.data()[1], 1.0f);
}

TEST(ReluTest, GradcheckMixedSign) {
  Rng rng(9);
  auto x = random_tensor<double>(rng, {4, 5}, 1.0, true);
  for (auto& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  std::vector<double> wts(x.numel());
  for (auto& v : wts) v = rng.normal();
  const auto r = check_gradients("relu", {x}, [&] { return weighted_sum(relu(x), std::span<const double>(wts)); });
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.kink_crossings, 0u);
}

TEST(MaxPoolTest, Basic) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = maxpool2d(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.data()[0], 4.0f);
}

TEST(MaxPoolTest, TieGoesToFirstIndex) {
  Tensor64 x({1, 1, 2, 2}, {5, 5, 5, 5}, true);
  auto y = maxpool2d(x);
  EXPECT_EQ(y.data()[0], 5.0);
  backward(sum(y));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 0, 0, 0}));
}

TEST(MaxPoolTest, OddEdgeDiscarded) {
  Tensor x({1, 1, 5, 3});
  auto y = maxpool2d(x);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 1}));
  EXPECT_THROW(maxpool2d(Tensor({1, 1, 1, 4})), DimensionError);
}

TEST(MaxPoolTest, MatchesBruteForceAndConservesMass) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_tensor<double>(rng, {2, 3, 4, 4}, 1.0, true);
    std::vector<double> up(2 * 3 * 2 * 2);
    for (auto& v : up) v = rng.normal();
    auto y = maxpool2d(x);
    backward(weighted_sum(y, std::span<const double>(up)));
    double mass = 0.0, up_mass = 0.0;
    for (double g : x.grad()) mass += g;
    for (double u : up) up_mass += u;
    EXPECT_NEAR(mass, up_mass, 1e-12);
    auto X = x.data();
    std::size_t nonzero = 0;
    for (double g : x.grad()) nonzero += g != 0.0;
    EXPECT_EQ(nonzero, up.size());
    for (std::size_t p = 0; p < 6; ++p)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          double m = -1e300;
          for (std::size_t u = 0; u < 2; ++u)
            for (std::size_t v = 0; v < 2; ++v) m = std::max(m, X[p * 16 + (2 * i + u) * 4 + 2 * j + v]);
          EXPECT_EQ(y.data()[p * 4 + i * 2 + j], m);
        }
  }
}

TEST(GlobalPoolTest, ConstantInput) {
  auto x = Tensor::full({2, 3, 4, 5}, 1.5f);
  auto y = global_pool(x);
  ASSERT_EQ(y.shape(), (Shape{2, 3}));
  for (float v : y.data()) EXPECT_EQ(v, 3.0f);
}

TEST(GlobalPoolTest, MeanPlusMax) {
  Tensor x({1, 1, 2, 2}, {0, 2, 4, 6});
  EXPECT_EQ(global_pool(x).data()[0], 9.0f);
}

TEST(GlobalPoolTest, Gradcheck) {
  Rng rng(12);
  auto x = random_tensor<double>(rng, {2, 3, 3, 4}, 1.0, true);
  std::vector<double> wts(6);
  for (auto& v : wts) v = rng.normal();
  const auto r =
      check_gradients("global_pool", {x}, [&] { return weighted_sum(global_pool(x), std::span<const double>(wts)); });
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(LinearTest, Identity) {
  Tensor x({2, 2}, {1, 2, 3, 4});
  Tensor w({2, 2}, {1, 0, 0, 1});
  Tensor b({2}, {0, 0});
  EXPECT_EQ(to_vector(linear(x, w, b)), to_vector(x));
}

TEST(LinearTest, HandProduct) {
  Tensor x({1, 2}, {1, 2});
  Tensor w({2, 2}, {1, 1, 0, 1});
  Tensor b({2}, {0, 1});
  EXPECT_EQ(to_vector(linear(x, w, b)), (std::vector<float>{3, 3}));
}

TEST(LinearTest, InnerExtentMismatch) {
  EXPECT_THROW(linear(Tensor({1, 3}), Tensor({2, 2}), Tensor({2})), DimensionError);
}

TEST(LinearTest, Gradcheck) {
  Rng rng(13);
  auto x = random_tensor<double>(rng, {3, 4}, 1.0, true);
  auto w = random_tensor<double>(rng, {5, 4}, 1.0, true);
  auto b = random_tensor<double>(rng, {5}, 1.0, true);
  std::vector<double> wts(15);
  for (auto& v : wts) v = rng.normal();
  const auto r = check_gradients("linear", {x, w, b},
                                 [&] { return weighted_sum(linear(x, w, b), std::span<const double>(wts)); });
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(BroadcastAddTest, ZeroVectorIsBitwiseIdentity) {
  Rng rng(6);
  auto maps = random_tensor<float>(rng, {2, 3, 4, 4});
  Tensor vec({2, 3});
  auto y = broadcast_add_channels(maps, vec);
  EXPECT_EQ(to_vector(y), to_vector(maps));
}

TEST(BroadcastAddTest, PerChannelShift) {
  Tensor maps({1, 2, 2, 2});
  Tensor vec({1, 2}, {1, 2});
  auto y = broadcast_add_channels(maps, vec);
  EXPECT_EQ(to_vector(y), (std::vector<float>{1, 1, 1, 1, 2, 2, 2, 2}));
  EXPECT_THROW(broadcast_add_channels(maps, Tensor({1, 3})), DimensionError);
}

TEST(BroadcastAddTest, VecGradientIsSpatialSum) {
  Rng rng(8);
  auto maps = random_tensor<double>(rng, {2, 3, 2, 3}, 1.0, true);
  auto vec = random_tensor<double>(rng, {2, 3}, 1.0, true);
  std::vector<double> wts(maps.numel());
  for (auto& v : wts) v = rng.normal();
  backward(weighted_sum(broadcast_add_channels(maps, vec), std::span<const double>(wts)));
  for (std::size_t nc = 0; nc < 6; ++nc) {
    double s = 0.0;
    for (std::size_t k = 0; k < 6; ++k) s += wts[nc * 6 + k];
    EXPECT_NEAR(vec.grad()[nc], s, 1e-12);
  }
  maps.zero_grad();
  vec.zero_grad();
  const auto r = check_gradients("broadcast", {maps, vec}, [&] {
    return weighted_sum(broadcast_add_channels(maps, vec), std::span<const double>(wts));
  });
  EXPECT_TRUE(r.passed);
}

TEST(DropoutTest, EvalAndZeroRateAreIdentity) {
  Rng rng(1);
  auto x = random_tensor<float>(rng, {4, 4});
  EXPECT_EQ(to_vector(dropout(x, 0.5, Mode::kEval, rng)), to_vector(x));
  EXPECT_EQ(to_vector(dropout(x, 0.0, Mode::kTrain, rng)), to_vector(x));
}

TEST(DropoutTest, InvertedScaling) {
  Rng rng(2);
  auto x = Tensor::full({1000}, 1.0f);
  auto y = dropout(x, 0.25, Mode::kTrain, rng);
  std::size_t kept = 0;
  for (float v : y.data()) {
    if (v != 0.0f) {
      ++kept;
      EXPECT_FLOAT_EQ(v, 1.0f / 0.75f);
    }
  }
  EXPECT_NEAR(kept / 1000.0, 0.75, 0.05);
}

TEST(ReshapeTest, KeepsDataRejectsBadCount) {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  auto y = reshape(x, {3, 2});
  EXPECT_EQ(to_vector(y), to_vector(x));
  EXPECT_THROW(reshape(x, {4}), DimensionError);
}

TEST(SoftmaxRowsTest, StableForLargeLogits) {
  const std::vector<double> logits{1000.0, 1000.0, 0.0, -5.0};
  const auto p = softmax_rows(logits, 2);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_NEAR(p[2] + p[3], 1.0, 1e-15);
  EXPECT_GT(p[2], p[3]);
}

}  // namespace
}  // namespace fuse_ser
