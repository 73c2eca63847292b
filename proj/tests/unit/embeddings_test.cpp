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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "fuse_ser/embeddings.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/random.hpp"
#include "support/test_support.hpp"

namespace fuse_ser {
namespace {

using testing::TempDir;
using testing::to_vector;

TEST(AverageTokensTest, SingleTokenIsItself) {
  std::vector<Tensor> tokens{Tensor({3}, {1.0f, -2.0f, 0.5f})};
  const auto e = average_token_embeddings(tokens);
  EXPECT_EQ(to_vector(e.vector), to_vector(tokens[0]));
  EXPECT_EQ(e.source, EmbeddingSource::kPrecomputed);
}

TEST(AverageTokensTest, TwoTokens) {
  std::vector<Tensor> tokens{Tensor({2}, {1.0f, 0.0f}), Tensor({2}, {0.0f, 1.0f})};
  EXPECT_EQ(to_vector(average_token_embeddings(tokens).vector), (std::vector<float>{0.5f, 0.5f}));
}

TEST(AverageTokensTest, MatchesBruteForceMean) {
  Rng rng(21);
  std::vector<Tensor> tokens;
  for (int i = 0; i < 5; ++i) tokens.push_back(testing::random_tensor<float>(rng, {16}));
  const auto e = average_token_embeddings(tokens);
  for (std::size_t d = 0; d < 16; ++d) {
    double s = 0.0;
    for (const auto& t : tokens) s += t.data()[d];
    EXPECT_NEAR(e.vector.data()[d], s / 5.0, 1e-7);
  }
}

TEST(AverageTokensTest, EmptyAndRaggedRejected) {
  EXPECT_THROW(average_token_embeddings({}), InvalidArgument);
  std::vector<Tensor> ragged{Tensor({2}), Tensor({3})};
  EXPECT_THROW(average_token_embeddings(ragged), DimensionError);
}

TEST(StoreTest, LoadTwoRows) {
  TempDir dir("emb");
  std::ofstream(dir / "e.csv") << "u1,0.1,0.2,0.3,0.4\nu2,1,2,3,4\n";
  const auto store = load_store(dir / "e.csv");
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.dim(), 4u);
  EXPECT_FLOAT_EQ(store.lookup("u2")[3], 4.0f);
  EXPECT_EQ(store.ids(), (std::vector<std::string>{"u1", "u2"}));
}

TEST(StoreTest, RaggedRowNamesLine) {
  TempDir dir("emb");
  std::ofstream(dir / "e.csv") << "u1,0.1,0.2\nu2,1,2\nu3,1\n";
  try {
    load_store(dir / "e.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(StoreTest, DuplicateAndNonNumericRejected) {
  TempDir dir("emb");
  std::ofstream(dir / "d.csv") << "u1,0.1\nu1,0.2\n";
  EXPECT_THROW(load_store(dir / "d.csv"), ParseError);
  std::ofstream(dir / "n.csv") << "u1,0.1\nu2,abc\n";
  try {
    load_store(dir / "n.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(StoreTest, RoundTrip) {
  TempDir dir("emb");
  Rng rng(4);
  EmbeddingStore store;
  for (int i = 0; i < 10; ++i) {
    std::vector<float> v(8);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    store.insert("id" + std::to_string(i), v);
  }
  save_store(dir / "a.csv", store);
  const auto loaded = load_store(dir / "a.csv");
  ASSERT_EQ(loaded.size(), store.size());
  for (const auto& id : store.ids()) {
    const auto a = store.lookup(id);
    const auto b = loaded.lookup(id);
    for (std::size_t d = 0; d < 8; ++d) EXPECT_EQ(a[d], b[d]);
  }
}

TEST(StoreTest, LookupIsRepeatableAndChecked) {
  EmbeddingStore store(2);
  store.insert("a", {1.0f, 2.0f});
  EXPECT_THROW(store.insert("b", {1.0f}), DimensionError);
  EXPECT_THROW(store.insert("a", {1.0f, 2.0f}), InvalidArgument);
  EXPECT_THROW(store.lookup("missing"), InvalidArgument);
  const auto first = store.get("a");
  const auto second = store.get("a");
  EXPECT_EQ(to_vector(first.vector), to_vector(second.vector));
  EXPECT_EQ(first.dim(), 2u);
}

TEST(ToyEmbedTest, Deterministic) {
  const auto a = toy_embed("the quick fox", 32, 7);
  const auto b = toy_embed("the quick fox", 32, 7);
  EXPECT_EQ(to_vector(a.vector), to_vector(b.vector));
  EXPECT_EQ(a.source, EmbeddingSource::kToy);
  EXPECT_NE(to_vector(toy_embed("the quick fox", 32, 8).vector), to_vector(a.vector));
}

TEST(ToyEmbedTest, EmptyTranscriptIsZero) {
  for (const char* text : {"", "   "}) {
    const auto e = toy_embed(text, 16, 1);
    ASSERT_EQ(e.dim(), 16u);
    for (float v : e.vector.data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(ToyEmbedTest, CompositionByAveraging) {
  const auto ab = toy_embed("a b", 24, 3);
  const auto a = toy_embed("a", 24, 3);
  const auto b = toy_embed("b", 24, 3);
  for (std::size_t d = 0; d < 24; ++d) {
    EXPECT_NEAR(ab.vector.data()[d], 0.5 * (a.vector.data()[d] + b.vector.data()[d]), 1e-7);
  }
}

TEST(ToyEmbedTest, TokenVectorsAreUnit) {
  const auto v = toy_token_vector("word", 64, 5);
  double norm = 0.0;
  for (float x : v) norm += double(x) * x;
  EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-6);
  EXPECT_THROW(toy_embed("x", 0, 1), InvalidArgument);
}

}  // namespace
}  // namespace fuse_ser
