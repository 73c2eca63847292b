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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Arguments select a subset of criteria by number.

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "fuse_ser/audio.hpp"
#include "fuse_ser/checkpoint.hpp"
#include "fuse_ser/dataset.hpp"
#include "fuse_ser/gradcheck.hpp"
#include "fuse_ser/losses.hpp"
#include "fuse_ser/metrics.hpp"
#include "fuse_ser/model.hpp"
#include "fuse_ser/random.hpp"
#include "fuse_ser/stats.hpp"
#include "fuse_ser/training.hpp"
#include "support/model_support.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

namespace fuse_ser {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

void note(const std::string& line) {
  std::fputs(("    " + line + "\n").c_str(), stdout);
  std::fflush(stdout);
}

// ---------------------------------------------------------------- 1

Verdict gradient_correctness() {
  Verdict v;
  const auto start = Clock::now();
  const auto results = run_gradcheck_suite(GradcheckScale::kTiny);
  const double elapsed = seconds_since(start);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
    if (!r.passed || !(r.max_rel_error < 1e-3)) v.require(false, fmt::format("{} rel {:.3e}", r.name, r.max_rel_error));
  }
  v.require(elapsed < 120.0, fmt::format("runtime {:.1f} s", elapsed));
  if (v.pass) {
    v.detail = fmt::format("{} checks, worst rel err {:.2e} ({}) < 1e-3, {:.1f} s < 120 s", results.size(), worst,
                           worst_name, elapsed);
  }
  return v;
}

// ---------------------------------------------------------------- 2

Verdict zero_conditioning() {
  Verdict v;
  ModelSpec base;
  base.backbone_channels = ModelSpec::scaled_channels(1.0 / 16.0);
  base.embedding_dim = 32;
  Rng rng(2024);
  Model<float> cnn(base, 1);
  testing::randomize_model(cnn, rng);
  auto sf_spec = base, mf_spec = base;
  sf_spec.fusion = Fusion::kSingleStage;
  mf_spec.fusion = Fusion::kMultistage;
  Model<float> sf(sf_spec, 2), mf(mf_spec, 3);
  testing::randomize_model(sf, rng);
  testing::randomize_model(mf, rng);
  testing::copy_shared_parameters(cnn, sf);
  testing::copy_shared_parameters(cnn, mf);
  sf.zero_projections();
  mf.zero_projections();

  NoGradGuard no_grad;
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng.below(4);
    const std::size_t t = 64 + rng.below(65);
    auto x = testing::random_tensor<float>(rng, {n, 1, t, 64}, 2.0);
    auto e = testing::random_tensor<float>(rng, {n, 32});
    const auto ref = cnn.forward(x, Tensor{}, Mode::kEval);
    for (Model<float>* m : {&sf, &mf}) {
      const auto out = m->forward(x, e, Mode::kEval);
      if (out.shape() != ref.shape() ||
          std::memcmp(out.data().data(), ref.data().data(), ref.numel() * sizeof(float)) != 0) {
        ++mismatches;
      }
    }
  }
  v.require(mismatches == 0, fmt::format("{} of 200 outputs differ from CNN14", mismatches));
  if (v.pass) v.detail = "SFCNN14 and MFCNN14 with zero projections equal CNN14 bitwise on 100 inputs each";
  return v;
}

// ---------------------------------------------------------------- 3

Verdict metric_oracles() {
  Verdict v;
  Rng rng(3);
  constexpr int kCases = 1000;
  double worst[5] = {0, 0, 0, 0, 0};
  double worst_p = 0.0;
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = 2 + rng.below(200);
    auto x = testing::normal_vector(rng, n, 0.1 + 3 * rng.uniform());
    auto y = testing::normal_vector(rng, n, 0.1 + 3 * rng.uniform());
    const double mix = rng.uniform(-1, 1), shift = 2 * rng.normal();
    for (std::size_t i = 0; i < n; ++i) y[i] += mix * x[i] + shift;
    worst[0] = std::max(worst[0], std::fabs(ccc(x, y) - oracle::ccc(x, y)));
    worst[1] = std::max(worst[1], std::fabs(pcc(x, y) - oracle::pcc(x, y)));

    const int k = 2 + static_cast<int>(rng.below(5));
    std::vector<int> truth, pred;
    const std::size_t m = static_cast<std::size_t>(k) + rng.below(300);
    for (std::size_t i = 0; i < m; ++i) {
      truth.push_back(i < static_cast<std::size_t>(k) ? static_cast<int>(i) : static_cast<int>(rng.below(k)));
      pred.push_back(rng.uniform() < 0.4 ? truth.back() : static_cast<int>(rng.below(k)));
    }
    const auto cm = ConfusionMatrix::from_labels(truth, pred, static_cast<std::size_t>(k));
    worst[2] = std::max(worst[2], std::fabs(uar(cm) - oracle::uar(truth, pred, k)));

    std::vector<double> yt(n), yp(n), e(n);
    const double slope = rng.normal(), intercept = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = 1 + 6 * rng.uniform();
      yp[i] = yt[i] - (slope * yt[i] + intercept + 0.3 * rng.normal());
      e[i] = yt[i] - yp[i];
    }
    const auto fit = residual_fit(make_residuals(yt, yp));
    const auto [os, oi] = oracle::ols(yt, e);
    worst[3] = std::max({worst[3], std::fabs(fit.slope - os) / std::max(1.0, std::fabs(os)),
                         std::fabs(fit.intercept - oi) / std::max(1.0, std::fabs(oi))});

    const std::size_t na = 2 + rng.below(20), nb = 2 + rng.below(20);
    auto a = testing::normal_vector(rng, na, 0.05 + rng.uniform());
    auto b = testing::normal_vector(rng, nb, 0.05 + rng.uniform());
    const double gap = rng.normal();
    for (double& u : b) u += gap;
    const bool welch = c % 2 == 1;
    const auto got = ttest_independent(a, b, welch ? TTestKind::kWelch : TTestKind::kStudent);
    const auto want = oracle::ttest(a, b, welch);
    worst[4] = std::max({worst[4], std::fabs(got.t - want.t) / std::max(1.0, std::fabs(want.t)),
                         std::fabs(got.df - want.df) / std::max(1.0, want.df)});
    worst_p = std::max(worst_p, std::fabs(got.p - want.p));
  }
  const char* names[5] = {"ccc", "pcc", "uar", "residual_fit", "ttest t/df"};
  std::string summary;
  for (int i = 0; i < 5; ++i) {
    v.require(worst[i] < 1e-9, fmt::format("{} deviates by {:.2e}", names[i], worst[i]));
    summary += fmt::format("{}{} {:.1e}", i ? ", " : "", names[i], worst[i]);
  }
  v.require(worst_p < 1e-6, fmt::format("ttest p deviates by {:.2e}", worst_p));
  if (v.pass) v.detail = fmt::format("{} cases each; worst {}, ttest p {:.1e}", kCases, summary, worst_p);
  return v;
}

// ------------------------------------------------------------- 4 and 5

struct SynthSplits {
  Dataset train, dev, test;
};

SynthSplits synth_splits() {
  SynthSpec spec;
  spec.n_per_class = 100;
  spec.seed = 100;
  SynthSplits s;
  s.train = synth_bimodal_dataset(spec);
  spec.n_per_class = 25;
  spec.seed = 200;
  s.dev = synth_bimodal_dataset(spec);
  spec.seed = 300;
  s.test = synth_bimodal_dataset(spec);
  return s;
}

TrainRunConfig desk_config(Fusion fusion, bool multitask) {
  TrainRunConfig c;
  c.model.backbone_channels = ModelSpec::scaled_channels(1.0 / 16.0);
  c.model.embedding_dim = 32;
  c.model.fusion = fusion;
  c.epochs = 10;
  c.batch_size = 32;
  c.lr = 0.01;
  c.momentum = 0.9;
  if (multitask) {
    c.task = parse_task("multitask");
    c.loss = LossKind::kCcc;
    c.selection_metric = SelectionMetric::kCccMean;
    c.model.head = HeadKind::kMultitaskRegression;
  }
  return c;
}

const char* arch_name(Fusion f) {
  switch (f) {
    case Fusion::kNone: return "CNN14";
    case Fusion::kSingleStage: return "SFCNN14";
    case Fusion::kMultistage: return "MFCNN14";
  }
  return "?";
}

SeedsResult five_seeds(const TrainRunConfig& config, const SynthSplits& data) {
  SeedsOptions o;
  o.n_seeds = 5;
  spdlog::set_level(spdlog::level::warn);
  auto r = run_seeds(config, data.train, data.dev, &data.test, o);
  spdlog::set_level(spdlog::level::info);
  return r;
}

Verdict fusion_beats_unimodal() {
  Verdict v;
  const auto start = Clock::now();
  const auto data = synth_splits();
  std::string detail;
  for (Fusion f : {Fusion::kNone, Fusion::kSingleStage, Fusion::kMultistage}) {
    const auto r = five_seeds(desk_config(f, false), data);
    note(fmt::format("{:<8} test UAR per seed [{:.3f}], mean {:.3f} (std {:.3f})", arch_name(f),
                     fmt::join(r.values, ", "), r.summary.mean, r.summary.std));
    if (f == Fusion::kNone) {
      v.require(r.summary.mean <= 0.60, fmt::format("CNN14 UAR {:.3f} > 0.60", r.summary.mean));
    } else {
      v.require(r.summary.mean >= 0.90, fmt::format("{} UAR {:.3f} < 0.90", arch_name(f), r.summary.mean));
    }
    detail += fmt::format("{}{} {:.3f}", detail.empty() ? "" : ", ", arch_name(f), r.summary.mean);
  }
  const double elapsed = seconds_since(start);
  v.require(elapsed < 900.0, fmt::format("runtime {:.0f} s >= 900 s", elapsed));
  if (v.pass) v.detail = fmt::format("mean test UAR over 5 seeds: {}; {:.0f} s < 900 s", detail, elapsed);
  return v;
}

double mean_dimension_ccc(const SeedsResult& r, Dimension d) {
  double sum = 0.0;
  for (const auto& run : r.runs) {
    for (const auto& dr : run.test->dimensions)
      if (dr.dimension == d) sum += *dr.ccc;
  }
  return sum / static_cast<double>(r.runs.size());
}

Verdict valence_from_text() {
  Verdict v;
  const auto data = synth_splits();
  double cnn_val = 0, mf_val = 0, mf_aro = 0;
  for (Fusion f : {Fusion::kNone, Fusion::kMultistage}) {
    const auto r = five_seeds(desk_config(f, true), data);
    const double aro = mean_dimension_ccc(r, Dimension::kArousal);
    const double val = mean_dimension_ccc(r, Dimension::kValence);
    const double dom = mean_dimension_ccc(r, Dimension::kDominance);
    note(fmt::format("{:<8} mean test CCC over 5 seeds: arousal {:.3f}, valence {:.3f}, dominance {:.3f}",
                     arch_name(f), aro, val, dom));
    if (f == Fusion::kNone) {
      cnn_val = val;
    } else {
      mf_val = val;
      mf_aro = aro;
    }
  }
  v.require(cnn_val <= 0.1, fmt::format("CNN14 valence CCC {:.3f} > 0.1", cnn_val));
  v.require(mf_val >= 0.8, fmt::format("MFCNN14 valence CCC {:.3f} < 0.8", mf_val));
  v.require(mf_aro >= 0.8, fmt::format("MFCNN14 arousal CCC {:.3f} < 0.8", mf_aro));
  if (v.pass) {
    v.detail = fmt::format("CNN14 valence {:.3f} <= 0.1; MFCNN14 valence {:.3f} >= 0.8, arousal {:.3f} >= 0.8", cnn_val,
                           mf_val, mf_aro);
  }
  return v;
}

// ---------------------------------------------------------------- 6

TrainRunConfig tiny_config() {
  TrainRunConfig c;
  c.model.backbone_channels = {4, 8};
  c.model.n_mels = 16;
  c.model.embedding_dim = 8;
  c.model.fusion = Fusion::kMultistage;
  c.epochs = 2;
  c.batch_size = 8;
  return c;
}

SynthSpec tiny_synth(std::uint64_t seed, std::size_t per_class) {
  SynthSpec s;
  s.n_per_class = per_class;
  s.seed = seed;
  s.frames = 16;
  s.n_mels = 16;
  s.embedding_dim = 8;
  return s;
}

Verdict protocol_fidelity() {
  Verdict v;
  testing::TempDir dir("acceptance");
  save_dataset(dir.path(), synth_bimodal_dataset(tiny_synth(6, 10)));
  const auto data = load_dataset(dir / "manifest.csv", dir / "embeddings.csv");

  std::set<std::string> sessions, speakers;
  for (const auto& r : data.records) {
    sessions.insert(r.session_id);
    speakers.insert(r.speaker_id);
  }
  v.require(sessions.size() == 5 && speakers.size() == 10, "manifest is not 5 sessions / 10 speakers");

  const auto plan = loso_folds(data.records);
  v.require(plan.folds.size() == 10, fmt::format("{} folds", plan.folds.size()));
  std::set<std::string> tested;
  auto session_of = [&](const std::string& speaker) {
    for (const auto& r : data.records)
      if (r.speaker_id == speaker) return r.session_id;
    return std::string();
  };
  for (const auto& f : plan.folds) {
    tested.insert(f.test_speaker);
    const bool partner = f.dev_speaker != f.test_speaker && session_of(f.dev_speaker) == session_of(f.test_speaker);
    v.require(partner, fmt::format("fold {} dev {} is not the session partner", f.test_speaker, f.dev_speaker));
    const auto idx = fold_indices(data.records, f);
    std::set<std::size_t> seen;
    for (const auto* part : {&idx.train, &idx.dev, &idx.test})
      for (auto i : *part) v.require(seen.insert(i).second, "fold partitions overlap");
    v.require(seen.size() == data.size(), "fold partitions do not cover the data");
    for (auto i : idx.train) {
      const auto& s = data.records[i].speaker_id;
      v.require(session_of(s) != session_of(f.test_speaker), "train set shares the test session");
    }
  }
  v.require(tested.size() == 10, "not every speaker is tested once");

  spdlog::set_level(spdlog::level::warn);
  const auto loso = run_loso(tiny_config(), plan, data);
  v.require(loso.folds.size() == 10, fmt::format("run_loso returned {} folds", loso.folds.size()));
  double fold_mean = 0.0;
  for (const auto& f : loso.folds) fold_mean += f.test_metric / static_cast<double>(loso.folds.size());
  v.require(std::fabs(fold_mean - loso.aggregate) <= 1e-12, "LOSO aggregate is not the fold mean");

  const auto tr = synth_bimodal_dataset(tiny_synth(1, 8)), dev = synth_bimodal_dataset(tiny_synth(2, 4)),
             te = synth_bimodal_dataset(tiny_synth(3, 4));
  SeedsOptions so;
  so.n_seeds = 5;
  const auto seeds = run_seeds(tiny_config(), tr, dev, &te, so);
  spdlog::set_level(spdlog::level::info);
  v.require(seeds.values.size() == 5, "run_seeds did not return 5 values");
  long double mean = 0, ss = 0;
  for (double x : seeds.values) mean += x;
  mean /= seeds.values.size();
  for (double x : seeds.values) ss += (x - mean) * (x - mean);
  const double std = static_cast<double>(std::sqrt(ss / (seeds.values.size() - 1)));
  const double dm = std::fabs(seeds.summary.mean - static_cast<double>(mean));
  const double ds = std::fabs(seeds.summary.std - std);
  v.require(dm <= 1e-12 && ds <= 1e-12, fmt::format("summary off by mean {:.1e}, std {:.1e}", dm, ds));
  for (std::size_t k = 0; k < seeds.runs.size(); ++k) {
    v.require(seeds.values[k] == seeds.runs[k].test->headline, "per-seed value is not the seed's test headline");
  }
  if (v.pass) {
    v.detail = fmt::format("10 folds with partner-as-dev; run_seeds(5) mean/std recomputed within {:.1e}/{:.1e}", dm,
                           ds);
  }
  return v;
}

// ---------------------------------------------------------------- 7

Verdict determinism_persistence() {
  Verdict v;
  const auto data = synth_splits();
  TrainOptions quiet;
  quiet.log = [](const std::string&) {};
  auto cfg = desk_config(Fusion::kMultistage, false);
  cfg.epochs = 1;
  cfg.seed = 3;
  const auto a = train(cfg, data.train, data.dev, quiet);
  const auto b = train(cfg, data.train, data.dev, quiet);
  const double la = a.curves.front().train_loss, lb = b.curves.front().train_loss;
  v.require(std::memcmp(&la, &lb, sizeof la) == 0, fmt::format("epoch-0 losses {:.17g} vs {:.17g}", la, lb));
  v.require(a.batch_losses == b.batch_losses, "batch losses differ");

  testing::TempDir dir("acceptance");
  double worst = 0.0;
  for (bool multitask : {false, true}) {
    auto c = desk_config(Fusion::kMultistage, multitask);
    c.epochs = 2;
    auto opts = quiet;
    opts.checkpoint_path = dir / (multitask ? "reg.bin" : "cls.bin");
    const auto r = train(c, data.train, data.dev, opts);
    auto ck = load_checkpoint(opts.checkpoint_path);
    const double reloaded = selection_value(ck.model, data.dev, c);
    const double diff = std::fabs(reloaded - r.best_dev_metric);
    worst = std::max(worst, diff);
    v.require(diff <= 1e-6, fmt::format("{} dev metric {:.9f} vs {:.9f}", multitask ? "ccc_mean" : "uar", reloaded,
                                        r.best_dev_metric));
  }
  if (v.pass) {
    v.detail = fmt::format("epoch-0 loss {:.17g} identical; checkpoint dev metric within {:.1e}", la, worst);
  }
  return v;
}

// ---------------------------------------------------------------- 8

Verdict frontend_sanity() {
  Verdict v;
  Rng rng(8);
  const FrontendConfig config;
  const std::size_t hop = 160;
  for (int i = 0; i < 20; ++i) {
    const std::size_t len = 800 + rng.below(48000);
    Waveform w;
    w.samples.resize(len);
    for (auto& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
    const auto mel = log_mel(w, config);
    // Centre padding adds half a window on each side, so T = floor(len / hop) + 1.
    const std::size_t want = len / hop + 1;
    v.require(mel.num_frames() == want, fmt::format("{} samples: {} frames, expected {}", len, mel.num_frames(), want));
  }

  const std::size_t n = 512;
  double worst_ratio = 1e300, worst_dft = 0.0;
  for (std::size_t bin : {5u, 40u, 111u, 200u}) {
    for (WindowKind kind : {WindowKind::kRectangular, WindowKind::kHann}) {
      Waveform w;
      w.samples.resize(n);
      for (std::size_t t = 0; t < n; ++t) {
        w.samples[t] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(bin * t) / n));
      }
      const auto m = stft(w, n, hop, kind, false);
      const auto win = window_coefficients(n, kind);
      std::vector<double> frame(n);
      for (std::size_t t = 0; t < n; ++t) frame[t] = w.samples[t] * win[t];
      for (std::size_t k = 0; k < m.bins; ++k) {
        worst_dft = std::max(worst_dft, std::fabs(m.at(0, k) - oracle::dft_magnitude(frame, k)) / n);
        // The Hann main lobe covers the two neighbouring bins.
        const bool lobe = kind == WindowKind::kHann && (k + 1 == bin || k == bin + 1);
        if (k != bin && !lobe && m.at(0, k) > 0) worst_ratio = std::min(worst_ratio, m.at(0, bin) / m.at(0, k));
      }
    }
  }
  v.require(worst_ratio >= 20.0, fmt::format("sine peak only {:.1f}x the next bin", worst_ratio));
  v.require(worst_dft < 1e-9, fmt::format("stft deviates from the direct DFT by {:.1e}", worst_dft));

  double worst_parseval = 0.0;
  Waveform noise;
  noise.samples.resize(16000);
  for (auto& s : noise.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  const auto m = stft(noise, n, hop, WindowKind::kHann, false);
  const auto win = window_coefficients(n, WindowKind::kHann);
  for (std::size_t t = 0; t < m.frames; ++t) {
    double time_energy = 0.0, freq_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = noise.samples[t * hop + i] * win[i];
      time_energy += s * s;
    }
    for (std::size_t k = 0; k < m.bins; ++k) {
      const double a2 = m.at(t, k) * m.at(t, k);
      freq_energy += (k == 0 || k == n / 2) ? a2 : 2.0 * a2;
    }
    freq_energy /= static_cast<double>(n);
    worst_parseval = std::max(worst_parseval, std::fabs(freq_energy - time_energy) / time_energy);
  }
  v.require(worst_parseval < 1e-4, fmt::format("Parseval relative error {:.1e}", worst_parseval));
  if (v.pass) {
    v.detail = fmt::format("20 frame counts exact; sine peak >= {:.0f}x other bins; Parseval rel err {:.1e} over {} frames",
                           worst_ratio, worst_parseval, m.frames);
  }
  return v;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Verdict()> run;
};

}  // namespace
}  // namespace fuse_ser

int main(int argc, char** argv) {
  using namespace fuse_ser;
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "zero-conditioning equivalence", zero_conditioning},
      {3, "metric oracles", metric_oracles},
      {4, "fusion beats unimodal", fusion_beats_unimodal},
      {5, "valence from text", valence_from_text},
      {6, "protocol fidelity", protocol_fidelity},
      {7, "determinism and persistence", determinism_persistence},
      {8, "frontend sanity", frontend_sanity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = fmt::format("exception: {}", e.what());
    }
    fmt::print("{} {} {}: {} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", c.id, c.title, v.detail, seconds_since(start));
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
