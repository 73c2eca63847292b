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
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fuse_ser/dataset.hpp"
#include "fuse_ser/manifest.hpp"
#include "fuse_ser/metrics.hpp"
#include "fuse_ser/model.hpp"

namespace fuse_ser {

/// Per-utterance model outputs. Regression buffers are row-major [N, D].
struct Predictions {
  Task task;
  std::vector<std::string> ids;
  std::vector<int> truth;
  std::vector<int> predicted;
  std::vector<double> probabilities;  // [N, K]
  std::vector<double> targets;
  std::vector<double> outputs;

  std::size_t size() const noexcept { return ids.size(); }
  std::vector<double> target_column(std::size_t d) const;
  std::vector<double> output_column(std::size_t d) const;
};

/// Throws InvalidArgument when the model's head or fusion cannot serve `task` on `data`.
void check_compatible(const ModelSpec& spec, const Task& task, const Dataset& data);

/// Eval-mode inference in batches without recording a graph.
Predictions predict(Model<float>& model, const Dataset& data, const Task& task, std::size_t batch_size = 64);

struct DimensionReport {
  Dimension dimension = Dimension::kArousal;
  std::optional<double> ccc;
  std::optional<double> pcc;
  double mse = 0.0;
  std::optional<LinearFit> residual_fit;
};

struct EvalReport {
  Task task;
  bool cross_corpus = false;
  std::string headline_key;  // "uar", "ccc" or "pcc"
  double headline = 0.0;
  std::size_t num_samples = 0;
  std::optional<double> uar;
  std::optional<ConfusionMatrix> confusion;
  std::vector<DimensionReport> dimensions;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Classification: UAR and confusion matrix. Regression: CCC, PCC, MSE and
/// residual fit per dimension; the headline is mean CCC, or mean PCC when
/// `cross_corpus` is set.
EvalReport evaluate(const Predictions& predictions, bool cross_corpus = false);
EvalReport evaluate(Model<float>& model, const Dataset& data, const Task& task, bool cross_corpus = false,
                    std::size_t batch_size = 64);

/// metrics.json, predictions.csv, plus confusion.csv (classification) or
/// residuals.csv (regression).
void write_report(const std::filesystem::path& dir, const EvalReport& report, const Predictions& predictions);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

}  // namespace fuse_ser
