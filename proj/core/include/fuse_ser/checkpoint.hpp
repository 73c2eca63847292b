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

#include <filesystem>
#include <nlohmann/json.hpp>

#include "fuse_ser/model.hpp"

namespace fuse_ser {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  Model<float> model;
  nlohmann::json meta;  // free-form run metadata (task, epoch, ...)
};

/// Writes a JSON header line (format version, model spec, tensor table with
/// byte offsets into the payload) followed by every parameter and batch-norm
/// statistic as little-endian float32, in header order.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const nlohmann::json& meta = nlohmann::json::object());

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fuse_ser
