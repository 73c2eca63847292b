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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuse_ser {

enum class Split { kTrain, kDev, kTest, kUnassigned };

const char* to_string(Split split);
Split parse_split(std::string_view text);

/// The three annotated emotional dimensions, in column order.
enum class Dimension { kArousal = 0, kValence = 1, kDominance = 2 };
inline constexpr std::size_t kNumDimensions = 3;

const char* to_string(Dimension dim);
Dimension parse_dimension(std::string_view text);

/// Class index order used everywhere: angry, happy, neutral, sad.
inline constexpr std::array<std::string_view, 4> kFourClassNames{"angry", "happy", "neutral", "sad"};
std::optional<int> four_class_index(std::string_view emotion);

/// What a model is trained to predict.
struct Task {
  enum class Kind { kFourClass, kSingleTask, kMultitask };
  Kind kind = Kind::kFourClass;
  Dimension dimension = Dimension::kArousal;  // kSingleTask only

  bool is_classification() const { return kind == Kind::kFourClass; }
  /// Number of regression targets (0 for classification).
  std::size_t num_targets() const;
  /// Dimensions predicted, in output column order.
  std::vector<Dimension> dimensions() const;
  std::string name() const;
  bool operator==(const Task&) const = default;
};

/// "four_class", "multitask", or "single_task:<dimension>" (also "<dimension>").
Task parse_task(std::string_view text);

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  std::string feature_path;
  std::optional<std::string> transcript;
  std::string speaker_id;
  std::string session_id;
  std::optional<std::string> emotion;
  std::optional<double> arousal;
  std::optional<double> valence;
  std::optional<double> dominance;
  Split split = Split::kUnassigned;

  std::optional<double> dimension(Dimension d) const;
};

/// Annotation scale of the dimensional labels, e.g. [1, 7] or [1, 5].
struct ScaleBounds {
  double lo = 1.0;
  double hi = 7.0;
};

inline constexpr std::string_view kManifestHeader =
    "id,audio_path,feature_path,transcript,speaker_id,session_id,emotion,arousal,valence,dominance,split";

/// Reads and validates a manifest CSV. Row numbers in errors are file lines.
std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path, ScaleBounds scale = {});
void save_manifest(const std::filesystem::path& path, std::span<const UtteranceRecord> records);

/// Checks id uniqueness, path presence and label ranges.
void validate_records(std::span<const UtteranceRecord> records, ScaleBounds scale = {}, std::string_view source = "manifest");

/// Logs class counts and split sizes.
void log_manifest_summary(std::span<const UtteranceRecord> records);

enum class Corpus { kMsp, kIemocap };
Corpus parse_corpus(std::string_view text);

/// Keeps angry/happy/neutral/sad. For IEMOCAP, "excited" is relabelled "happy" first.
std::vector<UtteranceRecord> four_class_filter(std::span<const UtteranceRecord> records, Corpus corpus);

std::vector<UtteranceRecord> select_split(std::span<const UtteranceRecord> records, Split split);

/// Assigns train/dev/test by ranking ids on a stable hash and cutting the
/// ranking at the requested fractions.
void assign_splits_by_hash(std::span<UtteranceRecord> records, double train_fraction = 0.70,
                           double dev_fraction = 0.15);

struct Fold {
  std::string test_speaker;
  std::string dev_speaker;
  std::vector<std::string> train_speakers;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

/// One fold per speaker; the dev speaker is the other speaker of the same
/// session. Sessions and speakers are visited in sorted order.
FoldPlan loso_folds(std::span<const UtteranceRecord> records);

struct FoldIndices {
  std::vector<std::size_t> train, dev, test;
};

/// Record indices of the train / dev / test partitions of one fold.
FoldIndices fold_indices(std::span<const UtteranceRecord> records, const Fold& fold);

/// Index batches for one epoch. With `shuffle`, the order is a permutation
/// determined by (seed, epoch); the final partial batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch = 0, bool shuffle = true);

}  // namespace fuse_ser
