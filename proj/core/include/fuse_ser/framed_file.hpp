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
#include <span>
#include <vector>

namespace fuse_ser {

/// A JSON header line followed by raw little-endian IEEE-754 float32 values.
/// Shared by checkpoints and precomputed feature files.
struct FramedFile {
  nlohmann::json header;
  std::vector<float> payload;
};

void write_framed(const std::filesystem::path& path, const nlohmann::json& header, std::span<const float> payload);
FramedFile read_framed(const std::filesystem::path& path);

}  // namespace fuse_ser
