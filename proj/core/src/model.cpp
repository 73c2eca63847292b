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

#include "fuse_ser/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace fuse_ser {

const char* to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::kNone: return "none";
    case Fusion::kSingleStage: return "single_stage";
    case Fusion::kMultistage: return "multistage";
  }
  return "none";
}

const char* to_string(HeadKind head) {
  switch (head) {
    case HeadKind::kClassification: return "classification";
    case HeadKind::kRegression: return "regression";
    case HeadKind::kMultitaskRegression: return "multitask_regression";
  }
  return "classification";
}

Fusion parse_fusion(std::string_view text) {
  if (text == "none" || text == "cnn14") return Fusion::kNone;
  if (text == "single_stage" || text == "sfcnn14") return Fusion::kSingleStage;
  if (text == "multistage" || text == "mfcnn14") return Fusion::kMultistage;
  throw ConfigError("model.fusion", fmt::format("unknown fusion '{}' (none|single_stage|multistage)", text));
}

HeadKind parse_head(std::string_view text) {
  if (text == "classification") return HeadKind::kClassification;
  if (text == "regression") return HeadKind::kRegression;
  if (text == "multitask_regression") return HeadKind::kMultitaskRegression;
  throw ConfigError("model.head",
                    fmt::format("unknown head '{}' (classification|regression|multitask_regression)", text));
}

std::size_t ModelSpec::output_dim() const {
  switch (head) {
    case HeadKind::kClassification: return n_classes;
    case HeadKind::kRegression: return 1;
    case HeadKind::kMultitaskRegression: return 3;
  }
  return 1;
}

void ModelSpec::validate() const {
  if (backbone_channels.empty()) throw ConfigError("model.backbone_channels", "at least one block is required");
  for (std::size_t i = 0; i < backbone_channels.size(); ++i) {
    if (backbone_channels[i] == 0) throw ConfigError(fmt::format("model.backbone_channels[{}]", i), "must be positive");
    if (i > 0 && backbone_channels[i] < backbone_channels[i - 1]) {
      throw ConfigError(fmt::format("model.backbone_channels[{}]", i), "widths must be nondecreasing");
    }
  }
  if (n_mels < min_input_extent()) {
    throw ConfigError("model.n_mels", fmt::format("{} blocks need at least {} mel bins", num_blocks(), min_input_extent()));
  }
  if (uses_embedding() && embedding_dim == 0) throw ConfigError("model.embedding_dim", "must be positive");
  if (head == HeadKind::kClassification && n_classes < 1) throw ConfigError("model.n_classes", "must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout", "must be in [0, 1)");
}

std::vector<std::size_t> ModelSpec::scaled_channels(double multiplier) {
  std::vector<std::size_t> out;
  for (std::size_t base : {64, 128, 256, 512, 1024, 2048}) {
    out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(base) * multiplier))));
  }
  return out;
}

void to_json(nlohmann::json& j, const ModelSpec& spec) {
  j = nlohmann::json{{"backbone_channels", spec.backbone_channels},
                     {"n_mels", spec.n_mels},
                     {"fusion", to_string(spec.fusion)},
                     {"embedding_dim", spec.embedding_dim},
                     {"head", to_string(spec.head)},
                     {"n_classes", spec.n_classes},
                     {"hidden_dim", spec.hidden_dim},
                     {"dropout", spec.dropout}};
}

void from_json(const nlohmann::json& j, ModelSpec& spec) {
  ModelSpec d;
  if (j.contains("width_multiplier") && !j.contains("backbone_channels")) {
    spec.backbone_channels = ModelSpec::scaled_channels(j.at("width_multiplier").get<double>());
  } else {
    spec.backbone_channels = j.value("backbone_channels", d.backbone_channels);
  }
  spec.n_mels = j.value("n_mels", d.n_mels);
  spec.fusion = parse_fusion(j.value("fusion", std::string("none")));
  spec.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  spec.head = parse_head(j.value("head", std::string("classification")));
  spec.n_classes = j.value("n_classes", d.n_classes);
  spec.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  spec.dropout = j.value("dropout", d.dropout);
}

template <typename T>
BasicTensor<T> conv_block(const BasicTensor<T>& x, ConvBlock<T>& block, Mode mode) {
  auto h1 = relu(batchnorm2d(conv2d(x, block.conv1_weight, block.conv1_bias), block.bn1_gamma, block.bn1_beta,
                             block.bn1_state, mode));
  auto h2 = relu(batchnorm2d(conv2d(h1, block.conv2_weight, block.conv2_bias), block.bn2_gamma, block.bn2_beta,
                             block.bn2_state, mode));
  return maxpool2d(h2);
}

template <typename T>
BasicTensor<T> conditioned_conv_block(const BasicTensor<T>& x, ConvBlock<T>& block, const BasicTensor<T>& embedding,
                                      Mode mode) {
  if (!block.proj_weight.defined()) {
    throw InvalidArgument("conditioned_conv_block: block has no projection parameters");
  }
  auto h3 = conv_block(x, block, mode);
  return broadcast_add_channels(h3, linear(embedding, block.proj_weight, block.proj_bias));
}

namespace {

template <typename T>
BasicTensor<T> uniform_tensor(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> data(numel(shape));
  for (auto& v : data) v = static_cast<T>(rng.uniform(-bound, bound));
  return BasicTensor<T>(std::move(shape), std::move(data), true);
}

template <typename T>
BasicTensor<T> zeros(Shape shape) {
  return BasicTensor<T>(std::move(shape), true);
}

template <typename T>
BasicTensor<T> ones(Shape shape) {
  return BasicTensor<T>::full(std::move(shape), T{1}, true);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), dropout_rng_(seed, RngStream::kDropout) {
  spec_.validate();
  Rng rng(seed, RngStream::kInit);
  std::size_t c_in = 1;
  for (std::size_t c_out : spec_.backbone_channels) {
    ConvBlock<T> b;
    b.conv1_weight = uniform_tensor<T>(Shape{c_out, c_in, 3, 3}, c_in * 9, rng);
    b.conv1_bias = zeros<T>(Shape{c_out});
    b.bn1_gamma = ones<T>(Shape{c_out});
    b.bn1_beta = zeros<T>(Shape{c_out});
    b.bn1_state = BatchNormState<T>(c_out);
    b.conv2_weight = uniform_tensor<T>(Shape{c_out, c_out, 3, 3}, c_out * 9, rng);
    b.conv2_bias = zeros<T>(Shape{c_out});
    b.bn2_gamma = ones<T>(Shape{c_out});
    b.bn2_beta = zeros<T>(Shape{c_out});
    b.bn2_state = BatchNormState<T>(c_out);
    if (spec_.fusion == Fusion::kMultistage) {
      b.proj_weight = uniform_tensor<T>(Shape{c_out, spec_.embedding_dim}, spec_.embedding_dim, rng);
      b.proj_bias = zeros<T>(Shape{c_out});
    }
    blocks_.push_back(std::move(b));
    c_in = c_out;
  }
  const std::size_t pooled = spec_.pooled_dim();
  if (spec_.fusion == Fusion::kSingleStage) {
    fusion_proj_weight_ = uniform_tensor<T>(Shape{pooled, spec_.embedding_dim}, spec_.embedding_dim, rng);
    fusion_proj_bias_ = zeros<T>(Shape{pooled});
  }
  const std::size_t hidden = spec_.effective_hidden_dim();
  fc1_weight_ = uniform_tensor<T>(Shape{hidden, pooled}, pooled, rng);
  fc1_bias_ = zeros<T>(Shape{hidden});
  head_weight_ = uniform_tensor<T>(Shape{spec_.output_dim(), hidden}, hidden, rng);
  head_bias_ = zeros<T>(Shape{spec_.output_dim()});
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model out;
  out.spec_ = spec_;
  auto copy = [](const BasicTensor<T>& t) { return t.defined() ? t.detach().set_requires_grad(t.requires_grad()) : t; };
  for (const auto& b : blocks_) {
    ConvBlock<T> c;
    c.conv1_weight = copy(b.conv1_weight);
    c.conv1_bias = copy(b.conv1_bias);
    c.bn1_gamma = copy(b.bn1_gamma);
    c.bn1_beta = copy(b.bn1_beta);
    c.conv2_weight = copy(b.conv2_weight);
    c.conv2_bias = copy(b.conv2_bias);
    c.bn2_gamma = copy(b.bn2_gamma);
    c.bn2_beta = copy(b.bn2_beta);
    c.bn1_state = b.bn1_state;
    c.bn2_state = b.bn2_state;
    c.proj_weight = copy(b.proj_weight);
    c.proj_bias = copy(b.proj_bias);
    out.blocks_.push_back(std::move(c));
  }
  out.fusion_proj_weight_ = copy(fusion_proj_weight_);
  out.fusion_proj_bias_ = copy(fusion_proj_bias_);
  out.fc1_weight_ = copy(fc1_weight_);
  out.fc1_bias_ = copy(fc1_bias_);
  out.head_weight_ = copy(head_weight_);
  out.head_bias_ = copy(head_bias_);
  out.dropout_rng_ = dropout_rng_;
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::parameters() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const auto p = fmt::format("blocks.{}.", i);
    out.push_back({p + "conv1.weight", b.conv1_weight});
    out.push_back({p + "conv1.bias", b.conv1_bias});
    out.push_back({p + "bn1.gamma", b.bn1_gamma});
    out.push_back({p + "bn1.beta", b.bn1_beta});
    out.push_back({p + "conv2.weight", b.conv2_weight});
    out.push_back({p + "conv2.bias", b.conv2_bias});
    out.push_back({p + "bn2.gamma", b.bn2_gamma});
    out.push_back({p + "bn2.beta", b.bn2_beta});
    if (b.proj_weight.defined()) {
      out.push_back({p + "proj.weight", b.proj_weight});
      out.push_back({p + "proj.bias", b.proj_bias});
    }
  }
  if (fusion_proj_weight_.defined()) {
    out.push_back({"fusion.proj.weight", fusion_proj_weight_});
    out.push_back({"fusion.proj.bias", fusion_proj_bias_});
  }
  out.push_back({"fc1.weight", fc1_weight_});
  out.push_back({"fc1.bias", fc1_bias_});
  out.push_back({"head.weight", head_weight_});
  out.push_back({"head.bias", head_bias_});
  return out;
}

template <typename T>
std::vector<std::pair<std::string, BatchNormState<T>*>> Model<T>::batchnorm_states() {
  std::vector<std::pair<std::string, BatchNormState<T>*>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    out.emplace_back(fmt::format("blocks.{}.bn1", i), &blocks_[i].bn1_state);
    out.emplace_back(fmt::format("blocks.{}.bn2", i), &blocks_[i].bn2_state);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const BatchNormState<T>*>> Model<T>::batchnorm_states() const {
  std::vector<std::pair<std::string, const BatchNormState<T>*>> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    out.emplace_back(fmt::format("blocks.{}.bn1", i), &blocks_[i].bn1_state);
    out.emplace_back(fmt::format("blocks.{}.bn2", i), &blocks_[i].bn2_state);
  }
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
void Model<T>::set_requires_grad(bool value) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(value);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename T>
void Model<T>::zero_projections() {
  auto clear = [](BasicTensor<T>& t) {
    if (t.defined()) std::fill(t.data().begin(), t.data().end(), T{0});
  };
  for (auto& b : blocks_) {
    clear(b.proj_weight);
    clear(b.proj_bias);
  }
  clear(fusion_proj_weight_);
  clear(fusion_proj_bias_);
}

template <typename T>
BasicTensor<T> Model<T>::prepare_input(const BasicTensor<T>& x) const {
  const auto& s = x.shape();
  BasicTensor<T> in = x;
  if (s.size() == 3) {
    in = reshape(x, Shape{s[0], 1, s[1], s[2]});
  } else if (s.size() != 4) {
    throw DimensionError("model", "rank", "input must be [N, 1, T, F] or [N, T, F], got " + to_string(s));
  }
  if (in.dim(1) != 1) throw DimensionError("model", "C", "expected a single input channel, got " + std::to_string(in.dim(1)));
  if (in.dim(3) != spec_.n_mels) {
    throw DimensionError("model", "F", fmt::format("expected {} mel bins, got {}", spec_.n_mels, in.dim(3)));
  }
  if (in.dim(2) < spec_.min_input_extent()) {
    throw DimensionError("model", "T",
                         fmt::format("{} frames cannot pass {} pooling stages (need >= {})", in.dim(2),
                                     spec_.num_blocks(), spec_.min_input_extent()));
  }
  return in;
}

template <typename T>
void Model<T>::check_embedding(const BasicTensor<T>& embedding, std::size_t batch) const {
  if (!embedding.defined()) throw InvalidArgument("model: fused architecture requires a linguistic embedding");
  if (embedding.rank() != 2) throw DimensionError("model", "rank", "embedding must be [N, L_dim]");
  if (embedding.dim(0) != batch) {
    throw DimensionError("model", "N", fmt::format("embedding batch {} vs input batch {}", embedding.dim(0), batch));
  }
  if (embedding.dim(1) != spec_.embedding_dim) {
    throw DimensionError("model", "L_dim",
                         fmt::format("embedding has {} values, model expects {}", embedding.dim(1), spec_.embedding_dim));
  }
}

template <typename T>
BasicTensor<T> Model<T>::head(const BasicTensor<T>& pooled, Mode mode) {
  auto h = dropout(pooled, spec_.dropout, mode, dropout_rng_);
  h = relu(linear(h, fc1_weight_, fc1_bias_));
  h = dropout(h, spec_.dropout, mode, dropout_rng_);
  return linear(h, head_weight_, head_bias_);
}

template <typename T>
BasicTensor<T> Model<T>::forward_cnn14(const BasicTensor<T>& x, Mode mode) {
  if (spec_.fusion != Fusion::kNone) throw InvalidArgument("forward_cnn14: spec fusion must be 'none'");
  auto h = prepare_input(x);
  for (auto& b : blocks_) h = conv_block(h, b, mode);
  return head(global_pool(h), mode);
}

template <typename T>
BasicTensor<T> Model<T>::forward_sfcnn14(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode) {
  if (spec_.fusion != Fusion::kSingleStage) throw InvalidArgument("forward_sfcnn14: spec fusion must be 'single_stage'");
  auto h = prepare_input(x);
  check_embedding(embedding, h.dim(0));
  for (auto& b : blocks_) h = conv_block(h, b, mode);
  auto pooled = add(global_pool(h), linear(embedding, fusion_proj_weight_, fusion_proj_bias_));
  return head(pooled, mode);
}

template <typename T>
BasicTensor<T> Model<T>::forward_mfcnn14(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode) {
  if (spec_.fusion != Fusion::kMultistage) throw InvalidArgument("forward_mfcnn14: spec fusion must be 'multistage'");
  auto h = prepare_input(x);
  check_embedding(embedding, h.dim(0));
  for (auto& b : blocks_) h = conditioned_conv_block(h, b, embedding, mode);
  return head(global_pool(h), mode);
}

template <typename T>
BasicTensor<T> Model<T>::forward(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode) {
  switch (spec_.fusion) {
    case Fusion::kNone: return forward_cnn14(x, mode);
    case Fusion::kSingleStage: return forward_sfcnn14(x, embedding, mode);
    case Fusion::kMultistage: return forward_mfcnn14(x, embedding, mode);
  }
  throw InvalidArgument("unknown fusion mode");
}

std::size_t expected_parameter_count(const ModelSpec& spec) {
  std::size_t n = 0, c_in = 1;
  for (std::size_t c : spec.backbone_channels) {
    n += c * c_in * 9 + c + 2 * c;  // conv1 + BN1
    n += c * c * 9 + c + 2 * c;     // conv2 + BN2
    if (spec.fusion == Fusion::kMultistage) n += c * spec.embedding_dim + c;
    c_in = c;
  }
  if (spec.fusion == Fusion::kSingleStage) n += spec.pooled_dim() * spec.embedding_dim + spec.pooled_dim();
  const std::size_t h = spec.effective_hidden_dim();
  n += h * spec.pooled_dim() + h;
  n += spec.output_dim() * h + spec.output_dim();
  return n;
}

std::vector<double> late_fuse(std::span<const double> pred_a, std::span<const double> pred_b, std::size_t cols,
                              LateFusionTask task) {
  if (pred_a.size() != pred_b.size()) {
    throw DimensionError("late_fuse", "N", fmt::format("{} vs {} values", pred_a.size(), pred_b.size()));
  }
  if (cols == 0 || pred_a.size() % cols != 0) {
    throw DimensionError("late_fuse", "K", fmt::format("{} values are not rows of {}", pred_a.size(), cols));
  }
  if (task == LateFusionTask::kClassification) {
    for (std::size_t r = 0; r < pred_a.size() / cols; ++r) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t k = 0; k < cols; ++k) {
        const double a = pred_a[r * cols + k], b = pred_b[r * cols + k];
        if (a < 0.0 || b < 0.0) throw InvalidArgument("late_fuse: classification inputs must be probabilities");
        sa += a;
        sb += b;
      }
      if (std::abs(sa - 1.0) > 1e-6 || std::abs(sb - 1.0) > 1e-6) {
        throw InvalidArgument(fmt::format("late_fuse: row {} is not a probability vector", r));
      }
    }
  }
  std::vector<double> out(pred_a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (pred_a[i] + pred_b[i]);
  return out;
}

template BasicTensor<float> conv_block(const BasicTensor<float>&, ConvBlock<float>&, Mode);
template BasicTensor<double> conv_block(const BasicTensor<double>&, ConvBlock<double>&, Mode);
template BasicTensor<float> conditioned_conv_block(const BasicTensor<float>&, ConvBlock<float>&,
                                                   const BasicTensor<float>&, Mode);
template BasicTensor<double> conditioned_conv_block(const BasicTensor<double>&, ConvBlock<double>&,
                                                    const BasicTensor<double>&, Mode);
template class Model<float>;
template class Model<double>;

}  // namespace fuse_ser
