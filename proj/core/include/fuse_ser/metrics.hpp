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
#include <optional>
#include <span>
#include <vector>

namespace fuse_ser {

/// counts[true][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 4);
  ConfusionMatrix(std::size_t classes, std::vector<std::size_t> counts);

  static ConfusionMatrix from_labels(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

  std::size_t classes() const noexcept { return k_; }
  void add(int truth, int predicted, std::size_t count = 1);
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  std::size_t row_sum(std::size_t truth) const;
  std::size_t total() const;
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

/// Mean per-class recall. Throws DegenerateError naming any class without support.
double uar(const ConfusionMatrix& cm);

/// Pearson correlation; throws DegenerateError on a constant input.
double pcc(std::span<const double> x, std::span<const double> y);

double mse(std::span<const double> pred, std::span<const double> target);

/// Per-cell 100 * (model - baseline) / baseline; cells with a zero baseline are nullopt.
std::vector<std::optional<double>> confusion_delta(const ConfusionMatrix& model, const ConfusionMatrix& baseline);

struct ResidualRecord {
  double y_t = 0.0;
  double y_p = 0.0;
  double e = 0.0;  // y_t - y_p
};

std::vector<ResidualRecord> make_residuals(std::span<const double> truth, std::span<const double> pred);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of e on y_t.
LinearFit residual_fit(std::span<const ResidualRecord> records);

/// Mean and sample standard deviation (n - 1). With one value the std is 0 and
/// `std_defined` is false.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  bool std_defined = false;
};

Summary summarize(std::span<const double> values);

}  // namespace fuse_ser
