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

#include <span>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// One Nesterov step on raw buffers:
///   v <- momentum * v - lr * g
///   p <- p + momentum * v - lr * g
/// which is the lookahead form v <- mu v - lr grad(p + mu v), p <- p + v
/// rewritten so `params` always hold the lookahead point.
template <typename T>
void sgd_nesterov_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr,
                       double momentum);

/// Stateful optimizer over a fixed parameter list. Velocity persists across steps.
template <typename T>
class SgdNesterov {
 public:
  SgdNesterov(std::vector<BasicTensor<T>> params, SgdOptions options);

  /// Applies one update using the gradients currently stored on the parameters.
  /// Parameters without a gradient are skipped.
  void step();
  void zero_grad();

  const SgdOptions& options() const noexcept { return options_; }
  std::span<const T> velocity(std::size_t i) const { return velocity_.at(i); }

 private:
  std::vector<BasicTensor<T>> params_;
  std::vector<std::vector<T>> velocity_;
  SgdOptions options_;
};

}  // namespace fuse_ser
