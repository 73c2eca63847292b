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

#include "fuse_ser/gradcheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fuse_ser/error.hpp"
#include "fuse_ser/losses.hpp"
#include "fuse_ser/model.hpp"
#include "fuse_ser/ops.hpp"
#include "fuse_ser/random.hpp"

namespace fuse_ser {

GradcheckResult check_gradients(std::string name, std::vector<Tensor64> leaves, const std::function<Tensor64()>& loss,
                                const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckResult result;
  result.name = std::move(name);
  for (auto& leaf : leaves) {
    if (!leaf.is_leaf()) throw InvalidArgument("check_gradients: every checked tensor must be a leaf");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }

  KinkTape tape;
  {
    KinkTapeGuard record(tape, KinkTapeGuard::Mode::kRecord);
    auto l = loss();
    backward(l);
  }

  Rng rng(options.seed, 0);
  auto evaluate = [&](bool& crossed) {
    NoGradGuard no_grad;
    KinkTapeGuard replay(tape, KinkTapeGuard::Mode::kReplay);
    const double v = loss().item();
    if (tape.cursor != tape.decisions.size()) {
      throw InvalidArgument("check_gradients: perturbed pass took fewer kink decisions than recorded");
    }
    crossed = crossed || tape.divergences > 0;
    return v;
  };

  struct LeafError {
    double diff_inf = 0.0, a_inf = 0.0, n_inf = 0.0;
  };
  std::vector<LeafError> leaf_errors;
  bool any_nan = false;
  double scale = 0.0;
  for (auto& leaf : leaves) {
    const auto analytic_span = leaf.grad();
    std::vector<double> analytic(analytic_span.begin(), analytic_span.end());
    if (analytic.empty()) analytic.assign(leaf.numel(), 0.0);
    std::vector<std::size_t> indices(leaf.numel());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    if (options.max_probes_per_leaf && indices.size() > options.max_probes_per_leaf) {
      shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_probes_per_leaf);
    }
    LeafError err;
    auto data = leaf.data();
    for (auto i : indices) {
      const double original = data[i];
      bool crossed = false;
      data[i] = original + options.step;
      const double plus = evaluate(crossed);
      data[i] = original - options.step;
      const double minus = evaluate(crossed);
      data[i] = original;
      if (crossed) ++result.kink_crossings;
      const double numeric = (plus - minus) / (2.0 * options.step);
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) any_nan = true;
      err.diff_inf = std::max(err.diff_inf, std::abs(analytic[i] - numeric));
      err.a_inf = std::max(err.a_inf, std::abs(analytic[i]));
      err.n_inf = std::max(err.n_inf, std::abs(numeric));
      ++result.probes;
    }
    scale = std::max(scale, err.a_inf);
    leaf_errors.push_back(err);
  }
  // A leaf whose true gradient vanishes (a conv bias feeding batch norm) is
  // judged against the largest gradient of the check instead of against zero.
  const double floor = 1e-8 * std::max(1.0, scale);
  for (const auto& e : leaf_errors) {
    result.max_rel_error = std::max(result.max_rel_error, e.diff_inf / std::max({e.a_inf, e.n_inf, floor}));
  }
  result.passed = !any_nan && result.probes > 0 && result.max_rel_error < options.tolerance;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

GradcheckScale parse_gradcheck_scale(std::string_view text) {
  if (text == "tiny") return GradcheckScale::kTiny;
  if (text == "default") return GradcheckScale::kDefault;
  throw InvalidArgument(fmt::format("unknown gradcheck spec '{}'; expected tiny or default", text));
}

namespace {

Tensor64 random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor64(std::move(shape), std::move(v), true);
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.normal();
  return w;
}

// Projects an arbitrary output onto a fixed random direction so every
// output element contributes to the checked gradient.
Tensor64 project(const Tensor64& out, const std::vector<double>& w) { return weighted_sum(out, std::span<const double>(w)); }

struct Sizes {
  std::size_t n, c_in, c_out, t, f, d_in, d_out, classes;
  std::vector<std::size_t> channels;
  std::size_t embedding_dim, arch_t, arch_f, arch_n;
};

Sizes sizes_for(GradcheckScale scale) {
  if (scale == GradcheckScale::kTiny) {
    return {2, 2, 3, 5, 6, 4, 3, 4, {4, 8}, 8, 8, 8, 3};
  }
  return {3, 4, 6, 9, 10, 12, 7, 4, {8, 16, 32}, 16, 16, 16, 4};
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(GradcheckScale scale, const GradcheckOptions& options) {
  const auto s = sizes_for(scale);
  GradcheckOptions arch_options = options;
  if (scale == GradcheckScale::kDefault && !arch_options.max_probes_per_leaf) arch_options.max_probes_per_leaf = 48;
  Rng rng(options.seed, 0);
  std::vector<GradcheckResult> results;

  {
    auto x = random_tensor({s.n, s.c_in, s.t, s.f}, rng);
    auto w = random_tensor({s.c_out, s.c_in, 3, 3}, rng, 0.5);
    auto b = random_tensor({s.c_out}, rng);
    auto dir = random_weights(s.n * s.c_out * s.t * s.f, rng);
    results.push_back(check_gradients("conv2d", {x, w, b}, [=] { return project(conv2d(x, w, b), dir); }, options));
    Conv2dOptions strided{2, 2, 1, 1};
    const std::size_t to = (s.t + 2 - 3) / 2 + 1, fo = (s.f + 2 - 3) / 2 + 1;
    auto dir2 = random_weights(s.n * s.c_out * to * fo, rng);
    results.push_back(check_gradients("conv2d_strided", {x, w, b},
                                      [=] { return project(conv2d(x, w, b, strided), dir2); }, options));
  }
  {
    auto x = random_tensor({s.n + 1, s.c_out, s.t, s.f}, rng);
    auto g = random_tensor({s.c_out}, rng);
    auto b = random_tensor({s.c_out}, rng);
    auto dir = random_weights(x.numel(), rng);
    auto state = std::make_shared<BatchNormState<double>>(s.c_out);
    results.push_back(check_gradients(
        "batchnorm2d_train", {x, g, b}, [=] { return project(batchnorm2d(x, g, b, *state, Mode::kTrain), dir); },
        options));
    auto eval_state = std::make_shared<BatchNormState<double>>(s.c_out);
    for (std::size_t c = 0; c < s.c_out; ++c) {
      eval_state->running_mean[c] = 0.1 * static_cast<double>(c);
      eval_state->running_var[c] = 0.5 + 0.25 * static_cast<double>(c);
    }
    eval_state->updates = 1;
    results.push_back(check_gradients(
        "batchnorm2d_eval", {x, g, b}, [=] { return project(batchnorm2d(x, g, b, *eval_state, Mode::kEval), dir); },
        options));
  }
  {
    auto x = random_tensor({s.n, s.c_in, s.t, s.f}, rng);
    auto dir = random_weights(x.numel(), rng);
    results.push_back(check_gradients("relu", {x}, [=] { return project(relu(x), dir); }, options));
    auto dir_pool = random_weights(s.n * s.c_in * (s.t / 2) * (s.f / 2), rng);
    results.push_back(check_gradients("maxpool2d", {x}, [=] { return project(maxpool2d(x), dir_pool); }, options));
    auto dir_gp = random_weights(s.n * s.c_in, rng);
    results.push_back(check_gradients("global_pool", {x}, [=] { return project(global_pool(x), dir_gp); }, options));
    auto v = random_tensor({s.n, s.c_in}, rng);
    results.push_back(check_gradients("broadcast_add_channels", {x, v},
                                      [=] { return project(broadcast_add_channels(x, v), dir); }, options));
    auto y = random_tensor({s.n, s.c_in, s.t, s.f}, rng);
    results.push_back(check_gradients("add", {x, y}, [=] { return project(add(x, y), dir); }, options));
    results.push_back(check_gradients("mul", {x, y}, [=] { return project(mul(x, y), dir); }, options));
    results.push_back(check_gradients("mul_self", {x}, [=] { return project(mul(x, x), dir); }, options));
    results.push_back(check_gradients("sum", {x}, [=] { return sum(mul(x, x)); }, options));
    results.push_back(check_gradients("weighted_sum", {x}, [=] { return project(x, dir); }, options));
    const std::size_t flat = s.c_in * s.t * s.f;
    results.push_back(check_gradients("reshape", {x}, [=] { return project(reshape(x, {s.n, flat}), dir); }, options));
    results.push_back(check_gradients("dropout", {x}, [=] {
      Rng drop(99, RngStream::kDropout);
      return project(dropout(x, 0.3, Mode::kTrain, drop), dir);
    }, options));
  }
  {
    auto x = random_tensor({s.n, s.d_in}, rng);
    auto w = random_tensor({s.d_out, s.d_in}, rng);
    auto b = random_tensor({s.d_out}, rng);
    auto dir = random_weights(s.n * s.d_out, rng);
    results.push_back(check_gradients("linear", {x, w, b}, [=] { return project(linear(x, w, b), dir); }, options));
  }
  {
    const std::size_t n = 8, k = s.classes;
    auto logits = random_tensor({n, k}, rng);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % k);
    std::vector<double> weights{1.0, 2.0, 0.5, 2.0};
    weights.resize(k, 1.0);
    results.push_back(check_gradients("weighted_cross_entropy", {logits},
                                      [=] { return weighted_cross_entropy(logits, labels, weights); }, options));
    results.push_back(check_gradients(
        "weighted_cross_entropy_weight_sum", {logits},
        [=] { return weighted_cross_entropy(logits, labels, weights, CeNormalization::kWeightSum); }, options));
    auto pred = random_tensor({n, 3}, rng);
    auto target = random_tensor({n, 3}, rng);
    results.push_back(check_gradients("mse_loss", {pred, target}, [=] { return mse_loss(pred, target); }, options));
    results.push_back(check_gradients("ccc_loss", {pred, target}, [=] { return ccc_loss(pred, target); }, options));
  }

  ModelSpec base;
  base.backbone_channels = s.channels;
  base.n_mels = s.arch_f;
  base.embedding_dim = s.embedding_dim;
  base.n_classes = 4;
  auto x = random_tensor({s.arch_n, 1, s.arch_t, s.arch_f}, rng);
  auto emb = random_tensor({s.arch_n, s.embedding_dim}, rng);
  {
    auto model = std::make_shared<Model<double>>([&] {
      auto spec = base;
      spec.fusion = Fusion::kMultistage;
      return spec;
    }(), options.seed);
    auto& block = model->blocks().front();
    auto dir = random_weights(s.arch_n * s.channels.front() * (s.arch_t / 2) * (s.arch_f / 2), rng);
    std::vector<Tensor64> leaves{x, block.conv1_weight, block.conv1_bias, block.bn1_gamma, block.bn1_beta,
                                 block.conv2_weight, block.conv2_bias, block.bn2_gamma, block.bn2_beta};
    results.push_back(check_gradients("conv_block", leaves, [=] {
      return project(conv_block(x, model->blocks().front(), Mode::kTrain), dir);
    }, arch_options));
    leaves.push_back(emb);
    leaves.push_back(block.proj_weight);
    leaves.push_back(block.proj_bias);
    results.push_back(check_gradients("conditioned_conv_block", leaves, [=] {
      return project(conditioned_conv_block(x, model->blocks().front(), emb, Mode::kTrain), dir);
    }, arch_options));
  }

  struct Arch {
    const char* name;
    Fusion fusion;
    HeadKind head;
  };
  for (const Arch& arch : {Arch{"cnn14", Fusion::kNone, HeadKind::kClassification},
                           Arch{"sfcnn14", Fusion::kSingleStage, HeadKind::kClassification},
                           Arch{"mfcnn14", Fusion::kMultistage, HeadKind::kClassification},
                           Arch{"mfcnn14_multitask", Fusion::kMultistage, HeadKind::kMultitaskRegression}}) {
    auto spec = base;
    spec.fusion = arch.fusion;
    spec.head = arch.head;
    auto model = std::make_shared<Model<double>>(spec, options.seed + 1);
    std::vector<Tensor64> leaves{x};
    if (spec.uses_embedding()) leaves.push_back(emb);
    for (auto& p : model->parameters()) leaves.push_back(p.tensor);
    auto dir = random_weights(s.arch_n * spec.output_dim(), rng);
    results.push_back(check_gradients(arch.name, leaves, [=] {
      return project(model->forward(x, emb, Mode::kTrain), dir);
    }, arch_options));
  }
  return results;
}

}  // namespace fuse_ser
