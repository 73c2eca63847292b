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

#include "fuse_ser/optim.hpp"

#include <string>

namespace fuse_ser {

template <typename T>
void sgd_nesterov_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, double lr,
                       double momentum) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    throw DimensionError("sgd_nesterov_step", "params",
                         "params/grads/velocity sizes " + std::to_string(params.size()) + "/" +
                             std::to_string(grads.size()) + "/" + std::to_string(velocity.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    const double v = momentum * static_cast<double>(velocity[i]) - lr * g;
    velocity[i] = static_cast<T>(v);
    params[i] = static_cast<T>(static_cast<double>(params[i]) + momentum * v - lr * g);
  }
}

template <typename T>
SgdNesterov<T>::SgdNesterov(std::vector<BasicTensor<T>> params, SgdOptions options)
    : params_(std::move(params)), options_(options) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), T{0});
}

template <typename T>
void SgdNesterov<T>::step() {
  std::vector<T> decayed;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    std::span<const T> g = p.grad();
    if (options_.weight_decay != 0.0) {
      decayed.assign(g.begin(), g.end());
      auto data = p.data();
      for (std::size_t j = 0; j < decayed.size(); ++j) {
        decayed[j] += static_cast<T>(options_.weight_decay) * data[j];
      }
      g = decayed;
    }
    sgd_nesterov_step<T>(p.data(), g, velocity_[i], options_.lr, options_.momentum);
  }
}

template <typename T>
void SgdNesterov<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template void sgd_nesterov_step<float>(std::span<float>, std::span<const float>, std::span<float>, double, double);
template void sgd_nesterov_step<double>(std::span<double>, std::span<const double>, std::span<double>, double,
                                        double);
template class SgdNesterov<float>;
template class SgdNesterov<double>;

}  // namespace fuse_ser
