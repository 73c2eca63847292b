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

#include "fuse_ser/checkpoint.hpp"

#include <fmt/format.h>

#include "fuse_ser/framed_file.hpp"

namespace fuse_ser {

namespace {

struct Entry {
  std::string name;
  Shape shape;
  std::span<float> values;
};

// Stable list of every persisted buffer. BN update counts are stored as a
// one-element float tensor; they stay far below 2^24 in practice.
std::vector<Entry> entries(Model<float>& model, std::vector<std::vector<float>>& scratch) {
  std::vector<Entry> out;
  for (auto& p : model.parameters()) out.push_back({p.name, p.tensor.shape(), p.tensor.data()});
  for (auto& [name, state] : model.batchnorm_states()) {
    out.push_back({name + ".running_mean", Shape{state->running_mean.size()}, state->running_mean});
    out.push_back({name + ".running_var", Shape{state->running_var.size()}, state->running_var});
    scratch.push_back({static_cast<float>(state->updates)});
    out.push_back({name + ".updates", Shape{1}, scratch.back()});
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const nlohmann::json& meta) {
  auto copy = model.clone();
  std::vector<std::vector<float>> scratch;
  scratch.reserve(2 * model.spec().num_blocks());
  auto list = entries(copy, scratch);
  nlohmann::json table = nlohmann::json::array();
  std::vector<float> payload;
  for (const auto& e : list) {
    table.push_back({{"name", e.name},
                     {"shape", e.shape},
                     {"offset", payload.size() * sizeof(float)},
                     {"count", e.values.size()}});
    payload.insert(payload.end(), e.values.begin(), e.values.end());
  }
  nlohmann::json header{{"format", "fuse-ser-checkpoint"},
                        {"format_version", kCheckpointFormatVersion},
                        {"model_spec", model.spec()},
                        {"meta", meta},
                        {"tensors", table}};
  write_framed(path, header, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  auto file = read_framed(path);
  const auto name = path.string();
  const auto& h = file.header;
  if (h.value("format", std::string{}) != "fuse-ser-checkpoint") throw ParseError(name, 1, "not a fuse-ser checkpoint");
  if (h.value("format_version", 0) != kCheckpointFormatVersion) {
    throw ParseError(name, 1, fmt::format("unsupported checkpoint version {}", h.value("format_version", 0)));
  }
  ModelSpec spec;
  try {
    spec = h.at("model_spec").get<ModelSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(name, 1, std::string("bad model_spec: ") + e.what());
  }
  Checkpoint ckpt{Model<float>(spec, 0), h.value("meta", nlohmann::json::object())};
  std::vector<std::vector<float>> scratch;
  scratch.reserve(2 * spec.num_blocks());
  auto list = entries(ckpt.model, scratch);
  const auto& table = h.at("tensors");
  if (table.size() != list.size()) {
    throw ParseError(name, 1, fmt::format("tensor table has {} entries, spec implies {}", table.size(), list.size()));
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& row = table[i];
    auto& e = list[i];
    if (row.at("name").get<std::string>() != e.name || row.at("shape").get<Shape>() != e.shape) {
      throw ParseError(name, 1, fmt::format("tensor {} is '{}' {}, expected '{}' {}", i, row.at("name").get<std::string>(),
                                            row.at("shape").dump(), e.name, to_string(e.shape)));
    }
    const auto offset = row.at("offset").get<std::size_t>();
    const auto count = row.at("count").get<std::size_t>();
    if (offset % sizeof(float) != 0 || count != e.values.size() || offset / sizeof(float) + count > file.payload.size()) {
      throw ParseError(name, 0, fmt::format("tensor '{}' lies outside the payload", e.name));
    }
    std::copy_n(file.payload.begin() + static_cast<std::ptrdiff_t>(offset / sizeof(float)), count, e.values.begin());
  }
  std::size_t k = 0;
  for (auto& [bn_name, state] : ckpt.model.batchnorm_states()) {
    state->updates = static_cast<std::uint64_t>(scratch[k++][0]);
  }
  return ckpt;
}

}  // namespace fuse_ser
