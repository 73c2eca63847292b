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

#include <benchmark/benchmark.h>

#include "fuse_ser/ops.hpp"
#include "fuse_ser/random.hpp"
#include "fuse_ser/tensor.hpp"

namespace {

using fuse_ser::Tensor;

Tensor random(fuse_ser::Rng& rng, fuse_ser::Shape shape, bool grad = false) {
  std::vector<float> v(fuse_ser::numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return Tensor(std::move(shape), std::move(v), grad);
}

// Args: channels, extent.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto t = static_cast<std::size_t>(state.range(1));
  fuse_ser::Rng rng(1);
  auto x = random(rng, {8, c, t, t});
  auto w = random(rng, {c, c, 3, 3});
  auto b = random(rng, {c});
  fuse_ser::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(fuse_ser::conv2d(x, w, b));
  state.SetItemsProcessed(state.iterations() * 8 * c * c * 9 * t * t);
}
BENCHMARK(BM_Conv2dForward)->Args({4, 64})->Args({16, 32})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto t = static_cast<std::size_t>(state.range(1));
  fuse_ser::Rng rng(2);
  auto x = random(rng, {8, c, t, t}, true);
  auto w = random(rng, {c, c, 3, 3}, true);
  auto b = random(rng, {c}, true);
  for (auto _ : state) {
    auto y = fuse_ser::sum(fuse_ser::conv2d(x, w, b));
    fuse_ser::backward(y);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({4, 64})->Args({16, 32})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_BatchNormTrain(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  fuse_ser::Rng rng(3);
  auto x = random(rng, {16, c, 32, 32});
  Tensor gamma({c}, std::vector<float>(c, 1.0f)), beta({c});
  fuse_ser::BatchNormState<float> st(c);
  fuse_ser::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(fuse_ser::batchnorm2d(x, gamma, beta, st, fuse_ser::Mode::kTrain));
}
BENCHMARK(BM_BatchNormTrain)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
