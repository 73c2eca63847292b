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
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuse_ser/dataset.hpp"
#include "fuse_ser/evaluation.hpp"
#include "fuse_ser/losses.hpp"
#include "fuse_ser/manifest.hpp"
#include "fuse_ser/metrics.hpp"
#include "fuse_ser/model.hpp"

namespace fuse_ser {

enum class LossKind { kWeightedCe, kMse, kCcc };
enum class SelectionMetric { kUar, kCccMean };

const char* to_string(LossKind loss);
const char* to_string(SelectionMetric metric);
LossKind parse_loss(std::string_view text);
SelectionMetric parse_selection_metric(std::string_view text);

struct TrainRunConfig {
  ModelSpec model;
  Task task;
  LossKind loss = LossKind::kWeightedCe;
  std::size_t epochs = 60;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  SelectionMetric selection_metric = SelectionMetric::kUar;
  CeNormalization ce_normalization = CeNormalization::kBatchMean;
  bool prefetch = false;

  /// Throws ConfigError naming the offending field. weighted_ce pairs with
  /// four_class, mse with single_task, ccc with single_task or multitask.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainRunConfig& c);
void from_json(const nlohmann::json& j, TrainRunConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;  // 1-based
  double best_dev_metric = 0.0;
  std::string checkpoint_path;
  std::vector<EpochRecord> curves;
  std::vector<double> batch_losses;  // every mini-batch loss, in order
  std::shared_ptr<Model<float>> best_model;
  std::string log;  // buffered progress lines
};

struct TrainOptions {
  std::filesystem::path checkpoint_path;  // empty: keep the best model in memory only
  std::function<void(const std::string&)> log;  // default: spdlog at info level
};

/// Index of the first maximum.
std::size_t select_best(std::span<const double> dev_metrics);

/// Dev metric used for model selection (UAR or mean CCC).
double selection_value(Model<float>& model, const Dataset& dev, const TrainRunConfig& config);

/// Full schedule with best-on-dev selection. Throws NumericError on a
/// non-finite loss.
RunResult train(const TrainRunConfig& config, const Dataset& train_set, const Dataset& dev_set,
                const TrainOptions& options = {});

struct SeedRun {
  RunResult run;
  std::optional<EvalReport> test;
};

struct SeedsResult {
  std::vector<SeedRun> runs;
  std::string metric_key;  // what `values` holds: test headline, or "dev_<metric>" without a test set
  std::vector<double> values;
  Summary summary;
  std::size_t best_seed_index = 0;  // by dev metric, lowest index on ties
};

struct SeedsOptions {
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path run_dir;  // empty: write nothing
  bool cross_corpus = false;
};

/// Trains seeds base_seed .. base_seed + n - 1 and summarizes the test
/// headline (dev metric when `test_set` is null) by mean and sample std.
SeedsResult run_seeds(const TrainRunConfig& config, const Dataset& train_set, const Dataset& dev_set,
                      const Dataset* test_set, const SeedsOptions& options = {});

struct FoldResult {
  Fold fold;
  SeedsResult seeds;
  double test_metric = 0.0;  // mean over seeds
  std::optional<double> external_metric;
};

struct LosoResult {
  std::vector<FoldResult> folds;
  std::string metric_key;
  double aggregate = 0.0;  // mean of fold test metrics
  std::optional<double> external_aggregate;
};

struct LosoOptions {
  LosoOptions() { seeds.n_seeds = 1; }

  SeedsOptions seeds;
  const Dataset* external_test = nullptr;  // cross-corpus: every fold model is also scored here
};

/// One training run set per fold; `run_dir/fold<f>/seed<k>` when writing.
LosoResult run_loso(const TrainRunConfig& config, const FoldPlan& plan, const Dataset& data,
                    const LosoOptions& options = {});

/// Experiment file: a TrainRunConfig plus data locations. Relative paths are
/// resolved against the config file's directory.
struct ExperimentConfig {
  std::string name = "experiment";
  TrainRunConfig run;
  std::filesystem::path manifest;
  std::filesystem::path embeddings;
  std::filesystem::path test_manifest;       // optional; otherwise the manifest's test split
  std::filesystem::path test_embeddings;
  std::filesystem::path external_manifest;   // optional cross-corpus test set
  std::filesystem::path external_embeddings;
  std::filesystem::path runs_dir = "runs";
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 0;
  ScaleBounds scale;
  std::optional<Corpus> four_class_corpus;  // apply four_class_filter when set
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Writes checkpoint-adjacent artifacts for one seed directory: metrics.json and curves.csv.
void write_seed_artifacts(const std::filesystem::path& dir, const SeedRun& run, const TrainRunConfig& config);
/// summary.json with per-seed values, mean/std and the best seed's report.
void write_summary(const std::filesystem::path& dir, const SeedsResult& result, const TrainRunConfig& config);

}  // namespace fuse_ser
