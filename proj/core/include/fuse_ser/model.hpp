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

#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuse_ser/ops.hpp"
#include "fuse_ser/random.hpp"
#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

/// Where the linguistic embedding enters the acoustic network.
enum class Fusion {
  kNone,         // CNN14: acoustics only
  kSingleStage,  // SFCNN14: added once to the pooled acoustic embedding
  kMultistage,   // MFCNN14: a per-channel shift after every conv block
};

enum class HeadKind { kClassification, kRegression, kMultitaskRegression };

const char* to_string(Fusion fusion);
const char* to_string(HeadKind head);
Fusion parse_fusion(std::string_view text);
HeadKind parse_head(std::string_view text);

/// Declarative architecture description.
struct ModelSpec {
  std::vector<std::size_t> backbone_channels{64, 128, 256, 512, 1024, 2048};
  std::size_t n_mels = 64;
  Fusion fusion = Fusion::kNone;
  std::size_t embedding_dim = 768;
  HeadKind head = HeadKind::kClassification;
  std::size_t n_classes = 4;
  std::size_t hidden_dim = 0;  // 0: width of the last block
  double dropout = 0.0;

  std::size_t num_blocks() const { return backbone_channels.size(); }
  std::size_t pooled_dim() const { return backbone_channels.back(); }
  std::size_t effective_hidden_dim() const { return hidden_dim ? hidden_dim : pooled_dim(); }
  std::size_t output_dim() const;
  /// Smallest T and F surviving one 2x2 pool per block.
  std::size_t min_input_extent() const { return std::size_t{1} << num_blocks(); }
  bool uses_embedding() const { return fusion != Fusion::kNone; }

  void validate() const;

  /// Default CNN14 widths (64 ... 2048) scaled by `multiplier` (e.g. 1/16), minimum 1.
  static std::vector<std::size_t> scaled_channels(double multiplier);
};

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

/// Parameters of one conv block: two conv -> BN -> ReLU stages then a 2x2 max pool.
/// `proj_weight` / `proj_bias` are set only for conditioned (multistage) blocks.
template <typename T>
struct ConvBlock {
  BasicTensor<T> conv1_weight, conv1_bias, bn1_gamma, bn1_beta;
  BasicTensor<T> conv2_weight, conv2_bias, bn2_gamma, bn2_beta;
  BatchNormState<T> bn1_state, bn2_state;
  BasicTensor<T> proj_weight, proj_bias;  // [C_out, L_dim], [C_out]

  std::size_t out_channels() const { return conv2_weight.dim(0); }
};

/// H1 = ReLU(BN(CONV(X))), H2 = ReLU(BN(CONV(H1))), H3 = MaxPool(H2).
template <typename T>
BasicTensor<T> conv_block(const BasicTensor<T>& x, ConvBlock<T>& block, Mode mode);

/// conv_block(x) + PROJ(E_L) broadcast over every (t, f) of each channel.
template <typename T>
BasicTensor<T> conditioned_conv_block(const BasicTensor<T>& x, ConvBlock<T>& block,
                                      const BasicTensor<T>& embedding, Mode mode);

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
};

template <typename T>
class Model {
 public:
  /// Builds and initializes all parameters from `seed`: conv/linear weights
  /// ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, BN gamma 1 / beta 0.
  Model(ModelSpec spec, std::uint64_t seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Deep copy including batch-norm statistics.
  Model clone() const;

  const ModelSpec& spec() const noexcept { return spec_; }

  /// x: [N, 1, T, n_mels] (or [N, T, n_mels]); embedding: [N, L_dim] when the
  /// spec fuses text, otherwise ignored. Returns [N, output_dim].
  BasicTensor<T> forward(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode);

  /// Trainable parameters in a stable order.
  std::vector<NamedTensor<T>> parameters() const;
  /// Batch-norm running statistics with their names, in the same stable order.
  std::vector<std::pair<std::string, BatchNormState<T>*>> batchnorm_states();
  std::vector<std::pair<std::string, const BatchNormState<T>*>> batchnorm_states() const;

  std::size_t parameter_count() const;
  void set_requires_grad(bool value);
  void zero_grad();
  /// Sets every fusion projection weight and bias to zero.
  void zero_projections();

  std::vector<ConvBlock<T>>& blocks() noexcept { return blocks_; }
  BasicTensor<T>& fusion_proj_weight() noexcept { return fusion_proj_weight_; }
  BasicTensor<T>& fusion_proj_bias() noexcept { return fusion_proj_bias_; }

  // Stage entry points; each checks that the spec matches.
  BasicTensor<T> forward_cnn14(const BasicTensor<T>& x, Mode mode);
  BasicTensor<T> forward_sfcnn14(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode);
  BasicTensor<T> forward_mfcnn14(const BasicTensor<T>& x, const BasicTensor<T>& embedding, Mode mode);

 private:
  Model() = default;
  BasicTensor<T> prepare_input(const BasicTensor<T>& x) const;
  void check_embedding(const BasicTensor<T>& embedding, std::size_t batch) const;
  BasicTensor<T> head(const BasicTensor<T>& pooled, Mode mode);

  ModelSpec spec_;
  std::vector<ConvBlock<T>> blocks_;
  BasicTensor<T> fusion_proj_weight_, fusion_proj_bias_;
  BasicTensor<T> fc1_weight_, fc1_bias_;
  BasicTensor<T> head_weight_, head_bias_;
  Rng dropout_rng_{0, RngStream::kDropout};
};

/// Closed-form parameter count for a spec (independent of any Model instance).
std::size_t expected_parameter_count(const ModelSpec& spec);

enum class LateFusionTask { kClassification, kRegression };

/// Averages two predictions. Classification inputs are row-wise probability
/// vectors ([N, cols]); regression inputs are raw values.
std::vector<double> late_fuse(std::span<const double> pred_a, std::span<const double> pred_b, std::size_t cols,
                              LateFusionTask task);

}  // namespace fuse_ser
