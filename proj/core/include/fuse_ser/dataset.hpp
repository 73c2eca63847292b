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

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fuse_ser/manifest.hpp"
#include "fuse_ser/tensor.hpp"

namespace fuse_ser {

/// Records with their spectrograms ([T, n_mels] each) and, optionally, one
/// linguistic embedding per record.
struct Dataset {
  std::vector<UtteranceRecord> records;
  std::vector<Tensor> features;
  std::vector<std::vector<float>> embeddings;  // empty, or one row per record

  std::size_t size() const noexcept { return records.size(); }
  bool has_embeddings() const noexcept { return !embeddings.empty(); }
  std::size_t embedding_dim() const { return embeddings.empty() ? 0 : embeddings.front().size(); }
  std::size_t n_mels() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset split(Split which) const;
  /// Four-class label per record; throws when a record has no mappable emotion.
  std::vector<int> class_labels() const;
  std::vector<std::size_t> class_counts() const;
  void validate() const;
};

/// Model-ready view of a set of records.
struct Batch {
  Tensor x;          // [N, 1, T, n_mels]
  Tensor embedding;  // [N, L] or undefined
  std::vector<int> labels;  // classification only
  Tensor targets;    // [N, D] regression only
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
};

/// All records in a batch must share T. Embeddings are included when present.
Batch collate(const Dataset& data, std::span<const std::size_t> indices, const Task& task);

/// Spectrogram file: JSON header {"T", "n_mels"} then float32 row-major values.
void write_features(const std::filesystem::path& path, const Tensor& frames);
Tensor read_features(const std::filesystem::path& path);

/// Loads a manifest and every feature file it references (relative paths
/// resolve against the manifest's directory). Embeddings are looked up by id.
Dataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& embeddings = {},
                     ScaleBounds scale = {});

/// Writes `manifest.csv`, `features/<id>.feat` and, if present, `embeddings.csv` under `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);

/// Generator for a 4-class audio/text toy problem. The class is
/// 2 * linguistic_bit + acoustic_bit. The acoustic bit decides whether the low
/// or high mel band carries extra energy; the linguistic bit decides which word
/// list the transcript draws from. Neither stream alone identifies the class.
/// Embeddings are sqrt(embedding_dim) * toy_embed(transcript), which puts their
/// coordinates on roughly the scale of averaged BERT token embeddings.
struct SynthSpec {
  std::size_t n_per_class = 100;
  std::uint64_t seed = 0;
  double noise = 0.5;          // std of per-cell spectrogram noise
  double target_noise = 0.2;   // std of noise on dimensional targets
  std::size_t frames = 64;
  std::size_t n_mels = 64;
  std::size_t embedding_dim = 32;
  std::uint64_t vocabulary_seed = 7;  // fixes the word vectors across generated sets
  std::size_t sessions = 5;
  std::size_t speakers_per_session = 2;
  std::string id_prefix = "syn";
};

Dataset synth_bimodal_dataset(const SynthSpec& spec);

/// Runs `produce(k)` for k = 0..count-1 on a worker thread, at most `capacity`
/// items ahead of the consumer.
template <typename Item>
class Prefetcher {
 public:
  Prefetcher(std::function<Item(std::size_t)> produce, std::size_t count, std::size_t capacity = 1)
      : produce_(std::move(produce)), count_(count), capacity_(capacity ? capacity : 1) {
    worker_ = std::thread([this] { run(); });
  }
  ~Prefetcher() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }
  Prefetcher(const Prefetcher&) = delete;
  Prefetcher& operator=(const Prefetcher&) = delete;

  /// Next item in order, or nullopt when all have been consumed.
  std::optional<Item> next() {
    std::unique_lock lock(mutex_);
    if (consumed_ == count_) return std::nullopt;
    cv_.wait(lock, [this] { return !queue_.empty() || error_; });
    if (queue_.empty() && error_) std::rethrow_exception(error_);
    Item item = std::move(queue_.front());
    queue_.pop_front();
    ++consumed_;
    cv_.notify_all();
    return item;
  }

 private:
  void run() {
    for (std::size_t k = 0; k < count_; ++k) {
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || queue_.size() < capacity_; });
        if (stop_) return;
      }
      try {
        Item item = produce_(k);
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(item));
      } catch (...) {
        std::lock_guard lock(mutex_);
        error_ = std::current_exception();
        cv_.notify_all();
        return;
      }
      cv_.notify_all();
    }
  }

  std::function<Item(std::size_t)> produce_;
  std::size_t count_;
  std::size_t capacity_;
  std::size_t consumed_ = 0;
  std::deque<Item> queue_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

}  // namespace fuse_ser
