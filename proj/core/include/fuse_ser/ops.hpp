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
#include <span>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

enum class Mode { kTrain, kEval };

struct Conv2dOptions {
  std::size_t stride_t = 1;
  std::size_t stride_f = 1;
  std::size_t pad_t = 1;
  std::size_t pad_f = 1;
};

/// 2D cross-correlation over [N, C_in, T, F] with weight [C_out, C_in, kT, kF]
/// and bias [C_out].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& options = {});

/// Running statistics of one batch-norm layer. `updates` counts how many
/// training batches have been folded in; eval mode refuses to run while it is 0.
template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::uint64_t updates = 0;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels)
      : running_mean(channels, T{0}), running_var(channels, T{1}) {}
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename T>
BasicTensor<T> batchnorm2d(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& beta, BatchNormState<T>& state, Mode mode,
                           const BatchNormOptions& options = {});

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Non-overlapping 2x2 max pooling; a trailing odd row/column is discarded.
/// Ties route the gradient to the lowest linear index.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_t = 2,
                         std::size_t window_f = 2);

/// [N, C, T, F] -> [N, C]: mean over (T, F) plus max over (T, F).
template <typename T>
BasicTensor<T> global_pool(const BasicTensor<T>& input);

/// [N, D_in] x [D_out, D_in]^T + [D_out].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

/// Adds vec[n, c] to every (t, f) position of maps[n, c].
template <typename T>
BasicTensor<T> broadcast_add_channels(const BasicTensor<T>& maps, const BasicTensor<T>& vec);

/// Elementwise a + b with identical shapes.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Elementwise a * b with identical shapes.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Sum of all elements as a [1] tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input);

/// sum(input * weights) for a constant weight buffer of the same size.
template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& input, std::span<const T> weights);

/// Inverted dropout. Identity in eval mode or when p == 0.
template <typename T, typename Rng>
BasicTensor<T> dropout(const BasicTensor<T>& input, double p, Mode mode, Rng& rng);

/// Same data, new shape.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape);

/// Row-wise softmax of [N, K] data, computed with max subtraction.
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols);

namespace detail {
template <typename T>
BasicTensor<T> apply_mask(const BasicTensor<T>& input, std::vector<T> mask, std::string_view op);
}

template <typename T, typename Rng>
BasicTensor<T> dropout(const BasicTensor<T>& input, double p, Mode mode, Rng& rng) {
  if (mode == Mode::kEval || p <= 0.0) return input;
  if (p >= 1.0) throw InvalidArgument("dropout probability must be < 1");
  std::vector<T> mask(input.numel());
  const T scale = T(1.0 / (1.0 - p));
  for (auto& m : mask) {
    // 53-bit uniform in [0, 1).
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u < p ? T{0} : scale;
  }
  return detail::apply_mask(input, std::move(mask), "dropout");
}

}  // namespace fuse_ser
