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
#include <span>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

/// Inverse-frequency class weights w_c = N / (K * n_c): uniform data gets unit
/// weights and sum_c n_c * w_c == N.
struct ClassWeights {
  std::vector<double> weights;
  std::vector<std::size_t> counts;
};

ClassWeights class_weights(std::span<const std::size_t> counts);

enum class CeNormalization {
  kBatchMean,   // divide by the number of samples
  kWeightSum,   // divide by the sum of the samples' weights
};

/// Weighted cross-entropy over logits [N, K]; log-softmax uses max subtraction.
template <typename T>
BasicTensor<T> weighted_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                                      std::span<const double> weights,
                                      CeNormalization normalization = CeNormalization::kBatchMean);

/// Mean squared error; pred and target must hold the same number of values.
template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Lin's concordance correlation coefficient with population (1/N) moments.
/// Throws DegenerateError when the denominator vanishes.
double ccc(std::span<const double> pred, std::span<const double> target);

/// (1/D) * sum_d (1 - CCC_d) over columns of [N, D] batches.
template <typename T>
BasicTensor<T> ccc_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace fuse_ser
