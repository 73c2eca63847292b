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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  std::size_t max_probes_per_leaf = 0;  // 0: probe every element
  std::uint64_t seed = 1234;
};

/// Worst per-leaf relative error ||analytic - numeric||_inf /
/// max(||analytic||_inf, ||numeric||_inf, 1e-8 * max(1, G)), where G is the
/// largest analytic gradient entry of the whole check.
///
/// Probes replay the ReLU signs and pooling argmaxes of the unperturbed pass,
/// so each central difference is taken on the piece the analytic gradient
/// belongs to. `kink_crossings` counts probes whose free-running decisions
/// would have differed.
struct GradcheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t kink_crossings = 0;
  bool passed = false;
  double seconds = 0.0;
};

/// Central differences against reverse mode for a scalar `loss` of `leaves`.
/// The leaves are perturbed in place, so `loss` should read them directly.
GradcheckResult check_gradients(std::string name, std::vector<Tensor64> leaves, const std::function<Tensor64()>& loss,
                                const GradcheckOptions& options = {});

enum class GradcheckScale { kTiny, kDefault };
GradcheckScale parse_gradcheck_scale(std::string_view text);

/// Every engine op, the losses, the conv blocks and the three architectures.
std::vector<GradcheckResult> run_gradcheck_suite(GradcheckScale scale, const GradcheckOptions& options = {});

}  // namespace fuse_ser
