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

#include "fuse_ser/audio.hpp"
#include "fuse_ser/random.hpp"

namespace {

fuse_ser::Waveform noise(double seconds) {
  fuse_ser::Rng rng(1);
  fuse_ser::Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * w.sample_rate));
  for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  return w;
}

// Arg: duration in seconds.
void BM_LogMel(benchmark::State& state) {
  const auto w = noise(static_cast<double>(state.range(0)));
  const fuse_ser::FrontendConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(fuse_ser::log_mel(w, config));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.samples.size()));
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Stft(benchmark::State& state) {
  const auto w = noise(4.0);
  const auto size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fuse_ser::stft(w, size, 160));
}
BENCHMARK(BM_Stft)->Arg(400)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
