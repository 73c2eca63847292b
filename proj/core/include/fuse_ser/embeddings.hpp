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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

enum class EmbeddingSource { kPrecomputed, kToy };

/// Utterance-level linguistic embedding: the mean of its token embeddings.
struct LinguisticEmbedding {
  Tensor vector;  // [L_dim]
  EmbeddingSource source = EmbeddingSource::kPrecomputed;

  std::size_t dim() const { return vector.numel(); }
};

/// Elementwise mean of token vectors of uniform dimension.
LinguisticEmbedding average_token_embeddings(std::span<const Tensor> tokens,
                                             EmbeddingSource source = EmbeddingSource::kPrecomputed);

/// Immutable-after-load map from utterance id to embedding. Iteration follows insertion order.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::string_view id) const;
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Adds a row; the first insert fixes the dimension when it is still 0.
  void insert(std::string id, std::vector<float> values);
  /// Throws InvalidArgument when absent.
  std::span<const float> lookup(std::string_view id) const;
  LinguisticEmbedding get(std::string_view id) const;

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<std::vector<float>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Headerless CSV: `utterance_id,e_0,...,e_{D-1}`.
EmbeddingStore load_store(const std::filesystem::path& path);
void save_store(const std::filesystem::path& path, const EmbeddingStore& store);

/// Deterministic stand-in for a language model: every whitespace token maps to
/// a pseudo-random unit vector keyed by (token, seed); the utterance vector is
/// their mean. An empty transcript yields the zero vector.
LinguisticEmbedding toy_embed(std::string_view transcript, std::size_t dim, std::uint64_t seed);

/// The unit vector toy_embed assigns to a single token.
std::vector<float> toy_token_vector(std::string_view token, std::size_t dim, std::uint64_t seed);

}  // namespace fuse_ser
