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

#include "fuse_ser/dataset.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "fuse_ser/embeddings.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/framed_file.hpp"
#include "fuse_ser/random.hpp"

namespace fuse_ser {

std::size_t Dataset::n_mels() const {
  if (features.empty()) return 0;
  return features.front().dim(1);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.records.reserve(indices.size());
  out.features.reserve(indices.size());
  for (auto i : indices) {
    if (i >= size()) throw InvalidArgument(fmt::format("Dataset::subset: index {} out of range {}", i, size()));
    out.records.push_back(records[i]);
    out.features.push_back(features[i]);
    if (has_embeddings()) out.embeddings.push_back(embeddings[i]);
  }
  return out;
}

Dataset Dataset::split(Split which) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i) {
    if (records[i].split == which) idx.push_back(i);
  }
  return subset(idx);
}

std::vector<int> Dataset::class_labels() const {
  std::vector<int> labels;
  labels.reserve(size());
  for (const auto& r : records) {
    auto idx = r.emotion ? four_class_index(*r.emotion) : std::nullopt;
    if (!idx) {
      throw InvalidArgument(fmt::format("record '{}' has no four-class emotion label ('{}')", r.id,
                                        r.emotion.value_or("")));
    }
    labels.push_back(*idx);
  }
  return labels;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(kFourClassNames.size(), 0);
  for (int y : class_labels()) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

void Dataset::validate() const {
  if (features.size() != records.size()) {
    throw DimensionError("Dataset", "N", fmt::format("{} records but {} feature tensors", records.size(), features.size()));
  }
  if (has_embeddings() && embeddings.size() != records.size()) {
    throw DimensionError("Dataset", "N", fmt::format("{} records but {} embeddings", records.size(), embeddings.size()));
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (features[i].rank() != 2) throw DimensionError("Dataset", "rank", fmt::format("features of '{}' are not [T, F]", records[i].id));
    if (features[i].dim(1) != n_mels()) {
      throw DimensionError("Dataset", "F", fmt::format("'{}' has {} mel bands, expected {}", records[i].id,
                                                       features[i].dim(1), n_mels()));
    }
    if (has_embeddings() && embeddings[i].size() != embedding_dim()) {
      throw DimensionError("Dataset", "L", fmt::format("embedding of '{}' has dimension {}, expected {}",
                                                       records[i].id, embeddings[i].size(), embedding_dim()));
    }
  }
}

Batch collate(const Dataset& data, std::span<const std::size_t> indices, const Task& task) {
  if (indices.empty()) throw InvalidArgument("collate: empty batch");
  const std::size_t n = indices.size();
  const auto& first = data.features.at(indices[0]);
  const std::size_t t = first.dim(0), f = first.dim(1);
  Batch batch;
  batch.indices.assign(indices.begin(), indices.end());
  std::vector<float> x;
  x.reserve(n * t * f);
  for (auto i : indices) {
    const auto& feat = data.features.at(i);
    if (feat.dim(0) != t || feat.dim(1) != f) {
      throw DimensionError("collate", feat.dim(0) != t ? "T" : "F",
                           fmt::format("'{}' is {} but the batch is [{}, {}]", data.records[i].id,
                                       to_string(feat.shape()), t, f));
    }
    auto src = feat.data();
    x.insert(x.end(), src.begin(), src.end());
  }
  batch.x = Tensor({n, 1, t, f}, std::move(x));
  if (data.has_embeddings()) {
    const std::size_t l = data.embedding_dim();
    std::vector<float> e;
    e.reserve(n * l);
    for (auto i : indices) e.insert(e.end(), data.embeddings[i].begin(), data.embeddings[i].end());
    batch.embedding = Tensor({n, l}, std::move(e));
  }
  if (task.is_classification()) {
    for (auto i : indices) {
      const auto& r = data.records[i];
      auto idx = r.emotion ? four_class_index(*r.emotion) : std::nullopt;
      if (!idx) throw InvalidArgument(fmt::format("record '{}' has no four-class emotion label", r.id));
      batch.labels.push_back(*idx);
    }
  } else {
    const auto dims = task.dimensions();
    std::vector<float> y;
    y.reserve(n * dims.size());
    for (auto i : indices) {
      for (auto d : dims) {
        auto v = data.records[i].dimension(d);
        if (!v) throw InvalidArgument(fmt::format("record '{}' has no {} label", data.records[i].id, to_string(d)));
        y.push_back(static_cast<float>(*v));
      }
    }
    batch.targets = Tensor({n, dims.size()}, std::move(y));
  }
  return batch;
}

void write_features(const std::filesystem::path& path, const Tensor& frames) {
  if (frames.rank() != 2) throw DimensionError("write_features", "rank", "expected [T, n_mels]");
  nlohmann::json header{{"T", frames.dim(0)}, {"n_mels", frames.dim(1)}};
  write_framed(path, header, frames.data());
}

Tensor read_features(const std::filesystem::path& path) {
  auto file = read_framed(path);
  std::size_t t = 0, f = 0;
  try {
    t = file.header.at("T").get<std::size_t>();
    f = file.header.at("n_mels").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, fmt::format("bad feature header: {}", e.what()));
  }
  if (t * f != file.payload.size()) {
    throw ParseError(path.string(), 0,
                     fmt::format("header declares {}x{} values but payload holds {}", t, f, file.payload.size()));
  }
  return Tensor({t, f}, std::move(file.payload));
}

Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& embeddings,
                     ScaleBounds scale) {
  Dataset data;
  data.records = load_manifest(manifest, scale);
  const auto base = manifest.parent_path();
  data.features.reserve(data.size());
  for (const auto& r : data.records) {
    if (r.feature_path.empty()) {
      throw InvalidArgument(fmt::format("record '{}' has no feature_path; run featurize first", r.id));
    }
    std::filesystem::path p(r.feature_path);
    if (p.is_relative()) p = base / p;
    data.features.push_back(read_features(p));
  }
  if (!embeddings.empty()) {
    const auto store = load_store(embeddings);
    data.embeddings.reserve(data.size());
    for (const auto& r : data.records) {
      if (!store.contains(r.id)) {
        throw InvalidArgument(fmt::format("no embedding for '{}' in {}", r.id, embeddings.string()));
      }
      auto row = store.lookup(r.id);
      data.embeddings.emplace_back(row.begin(), row.end());
    }
  }
  data.validate();
  return data;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  data.validate();
  std::filesystem::create_directories(dir / "features");
  auto records = data.records;
  for (std::size_t i = 0; i < data.size(); ++i) {
    records[i].feature_path = (std::filesystem::path("features") / (records[i].id + ".feat")).generic_string();
    write_features(dir / records[i].feature_path, data.features[i]);
  }
  save_manifest(dir / "manifest.csv", records);
  if (data.has_embeddings()) {
    EmbeddingStore store(data.embedding_dim());
    for (std::size_t i = 0; i < data.size(); ++i) store.insert(records[i].id, data.embeddings[i]);
    save_store(dir / "embeddings.csv", store);
  }
}

namespace {

constexpr std::array<std::string_view, 6> kNegativeWords{"awful", "hate", "terrible", "worst", "horrible", "angry"};
constexpr std::array<std::string_view, 6> kPositiveWords{"great", "love", "wonderful", "best", "lovely", "glad"};
constexpr std::array<std::string_view, 8> kFillers{"the", "a", "it", "was", "i", "really", "today", "this"};
constexpr std::size_t kSentimentWords = 4;
constexpr std::size_t kFillerWords = 2;

double clamp_scale(double v) { return std::clamp(v, 1.0, 7.0); }

}  // namespace

Dataset synth_bimodal_dataset(const SynthSpec& spec) {
  if (spec.n_per_class == 0) throw InvalidArgument("synth_bimodal_dataset: n_per_class must be >= 1");
  if (spec.frames == 0 || spec.n_mels < 2) throw InvalidArgument("synth_bimodal_dataset: need frames >= 1 and n_mels >= 2");
  if (spec.sessions == 0 || spec.speakers_per_session == 0) {
    throw InvalidArgument("synth_bimodal_dataset: sessions and speakers_per_session must be >= 1");
  }
  Rng rng(spec.seed, RngStream::kSynth);
  const std::size_t n = 4 * spec.n_per_class;
  const std::size_t speakers = spec.sessions * spec.speakers_per_session;
  const std::size_t low_band = spec.n_mels / 2;
  const float gain = static_cast<float>(std::sqrt(static_cast<double>(spec.embedding_dim)));
  Dataset data;
  data.records.reserve(n);
  data.features.reserve(n);
  data.embeddings.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 4);
    const int ling = label >> 1;
    const int acoustic = label & 1;
    const double energy = rng.uniform();

    std::vector<float> frames(spec.frames * spec.n_mels);
    const double amplitude = 1.0 + 2.0 * energy;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t m = 0; m < spec.n_mels; ++m) {
        const bool active = acoustic == 0 ? m < low_band : m >= low_band;
        frames[t * spec.n_mels + m] = static_cast<float>((active ? amplitude : 0.0) + spec.noise * rng.normal());
      }
    }

    std::vector<std::string_view> words;
    const auto& vocab = ling == 0 ? kNegativeWords : kPositiveWords;
    for (std::size_t w = 0; w < kSentimentWords; ++w) words.push_back(vocab[rng.below(vocab.size())]);
    for (std::size_t w = 0; w < kFillerWords; ++w) words.push_back(kFillers[rng.below(kFillers.size())]);
    shuffle(words.begin(), words.end(), rng);
    std::string transcript;
    for (auto w : words) {
      if (!transcript.empty()) transcript += ' ';
      transcript += w;
    }

    const double arousal = clamp_scale(1.5 + 4.0 * energy + spec.target_noise * rng.normal());
    const double valence = clamp_scale((ling ? 5.5 : 2.5) + spec.target_noise * rng.normal());
    const double dominance = clamp_scale(0.5 * (1.5 + 4.0 * energy) + 0.5 * (ling ? 5.5 : 2.5) +
                                         spec.target_noise * rng.normal());

    const std::size_t speaker = (i / 4) % speakers;
    const std::size_t session = speaker / spec.speakers_per_session;
    UtteranceRecord r;
    r.id = fmt::format("{}{}_{:05d}", spec.id_prefix, spec.seed, i);
    r.feature_path = fmt::format("features/{}.feat", r.id);
    r.transcript = transcript;
    r.session_id = fmt::format("S{}", session + 1);
    r.speaker_id = fmt::format("S{}_{}", session + 1, speaker % spec.speakers_per_session);
    r.emotion = std::string(kFourClassNames[static_cast<std::size_t>(label)]);
    r.arousal = arousal;
    r.valence = valence;
    r.dominance = dominance;

    auto embedding = toy_embed(transcript, spec.embedding_dim, spec.vocabulary_seed);
    auto ev = embedding.vector.data();
    auto& row = data.embeddings.emplace_back(ev.begin(), ev.end());
    for (auto& v : row) v *= gain;
    data.features.push_back(Tensor({spec.frames, spec.n_mels}, std::move(frames)));
    data.records.push_back(std::move(r));
  }
  return data;
}

}  // namespace fuse_ser
