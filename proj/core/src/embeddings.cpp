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

#include "fuse_ser/embeddings.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fuse_ser/csv.hpp"
#include "fuse_ser/random.hpp"

namespace fuse_ser {

LinguisticEmbedding average_token_embeddings(std::span<const Tensor> tokens, EmbeddingSource source) {
  if (tokens.empty()) throw InvalidArgument("average_token_embeddings: no token vectors");
  const std::size_t dim = tokens.front().numel();
  std::vector<double> acc(dim, 0.0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].numel() != dim) {
      throw DimensionError("average_token_embeddings", "L_dim",
                           fmt::format("token {} has {} values, expected {}", t, tokens[t].numel(), dim));
    }
    auto v = tokens[t].data();
    for (std::size_t i = 0; i < dim; ++i) acc[i] += static_cast<double>(v[i]);
  }
  std::vector<float> mean(dim);
  for (std::size_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(acc[i] / static_cast<double>(tokens.size()));
  return {Tensor(Shape{dim}, std::move(mean)), source};
}

bool EmbeddingStore::contains(std::string_view id) const { return index_.contains(std::string(id)); }

void EmbeddingStore::insert(std::string id, std::vector<float> values) {
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) {
    throw DimensionError("EmbeddingStore", "L_dim",
                         fmt::format("row '{}' has {} values, store dimension is {}", id, values.size(), dim_));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(fmt::format("embedding '{}' contains a non-finite value", id));
  }
  if (index_.contains(id)) throw InvalidArgument(fmt::format("duplicate embedding id '{}'", id));
  index_.emplace(id, rows_.size());
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(values));
}

std::span<const float> EmbeddingStore::lookup(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw InvalidArgument(fmt::format("no embedding for utterance '{}'", id));
  return rows_[it->second];
}

LinguisticEmbedding EmbeddingStore::get(std::string_view id) const {
  auto row = lookup(id);
  return {Tensor(Shape{dim_}, std::vector<float>(row.begin(), row.end())), EmbeddingSource::kPrecomputed};
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  CsvReader reader(in);
  std::vector<std::string> row;
  EmbeddingStore store;
  const auto name = path.string();
  while (reader.next(row)) {
    if (row.size() < 2) throw ParseError(name, reader.line(), "expected an id followed by at least one value");
    if (store.size() > 0 && row.size() - 1 != store.dim()) {
      throw ParseError(name, reader.line(),
                       fmt::format("ragged row: {} values, expected {}", row.size() - 1, store.dim()));
    }
    if (row[0].empty()) throw ParseError(name, reader.line(), "empty utterance id");
    if (store.contains(row[0])) throw ParseError(name, reader.line(), fmt::format("duplicate id '{}'", row[0]));
    std::vector<float> values(row.size() - 1);
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (!parse_float(row[i], values[i - 1]) || !std::isfinite(values[i - 1])) {
        throw ParseError(name, reader.line(), fmt::format("field {} is not a finite number: '{}'", i, row[i]));
      }
    }
    store.insert(row[0], std::move(values));
  }
  return store;
}

void save_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& id : store.ids()) {
    out << csv_escape(id);
    for (float v : store.lookup(id)) out << ',' << fmt::format("{}", v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<float> toy_token_vector(std::string_view token, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed ^ fnv1a(token), RngStream::kToyEmbedding);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

LinguisticEmbedding toy_embed(std::string_view transcript, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw InvalidArgument("toy_embed: dim must be >= 1");
  std::vector<Tensor> tokens;
  std::istringstream words{std::string(transcript)};
  std::string word;
  while (words >> word) tokens.emplace_back(Shape{dim}, toy_token_vector(word, dim, seed));
  if (tokens.empty()) {
    spdlog::warn("empty transcript; using the zero embedding");
    return {Tensor(Shape{dim}), EmbeddingSource::kToy};
  }
  return average_token_embeddings(tokens, EmbeddingSource::kToy);
}

}  // namespace fuse_ser
