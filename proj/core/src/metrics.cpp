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

#include "fuse_ser/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cmath>

#include "fuse_ser/error.hpp"

namespace fuse_ser {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw InvalidArgument("ConfusionMatrix: need at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::size_t> counts)
    : k_(classes), counts_(std::move(counts)) {
  if (classes == 0) throw InvalidArgument("ConfusionMatrix: need at least one class");
  if (counts_.size() != k_ * k_) {
    throw DimensionError("ConfusionMatrix", "K", fmt::format("{} counts for {} classes", counts_.size(), k_));
  }
}

ConfusionMatrix ConfusionMatrix::from_labels(std::span<const int> truth, std::span<const int> predicted,
                                             std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw DimensionError("ConfusionMatrix", "N", fmt::format("{} labels vs {} predictions", truth.size(), predicted.size()));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(int truth, int predicted, std::size_t count) {
  const auto k = static_cast<int>(k_);
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
    throw InvalidArgument(fmt::format("ConfusionMatrix: label pair ({}, {}) outside [0, {})", truth, predicted, k_));
  }
  counts_[static_cast<std::size_t>(truth) * k_ + static_cast<std::size_t>(predicted)] += count;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += at(truth, j);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

double uar(const ConfusionMatrix& cm) {
  std::vector<std::size_t> missing;
  double recall = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto support = cm.row_sum(c);
    if (support == 0) {
      missing.push_back(c);
      continue;
    }
    recall += static_cast<double>(cm.at(c, c)) / static_cast<double>(support);
  }
  if (!missing.empty()) {
    throw DegenerateError(fmt::format("uar: classes without support: {}", fmt::join(missing, ", ")));
  }
  return recall / static_cast<double>(cm.classes());
}

double pcc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pcc", "N", fmt::format("{} vs {} values", x.size(), y.size()));
  if (x.size() < 2) throw InvalidArgument("pcc: need at least 2 values");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("pcc: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse", "N", fmt::format("{} vs {} values", pred.size(), target.size()));
  }
  if (pred.empty()) throw InvalidArgument("mse: empty input");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

std::vector<std::optional<double>> confusion_delta(const ConfusionMatrix& model, const ConfusionMatrix& baseline) {
  if (model.classes() != baseline.classes()) {
    throw DimensionError("confusion_delta", "K", fmt::format("{} vs {} classes", model.classes(), baseline.classes()));
  }
  for (std::size_t c = 0; c < model.classes(); ++c) {
    if (model.row_sum(c) != baseline.row_sum(c)) {
      throw InvalidArgument(fmt::format("confusion_delta: class {} support differs ({} vs {}); not the same test set", c,
                                        model.row_sum(c), baseline.row_sum(c)));
    }
  }
  std::vector<std::optional<double>> out;
  out.reserve(model.counts().size());
  for (std::size_t i = 0; i < model.counts().size(); ++i) {
    const auto b = baseline.counts()[i];
    if (b == 0) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(100.0 * (static_cast<double>(model.counts()[i]) - static_cast<double>(b)) / static_cast<double>(b));
    }
  }
  return out;
}

std::vector<ResidualRecord> make_residuals(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) {
    throw DimensionError("make_residuals", "N", fmt::format("{} vs {} values", truth.size(), pred.size()));
  }
  std::vector<ResidualRecord> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = {truth[i], pred[i], truth[i] - pred[i]};
  return out;
}

LinearFit residual_fit(std::span<const ResidualRecord> records) {
  if (records.size() < 2) throw DegenerateError("residual_fit: need at least 2 records");
  const auto n = static_cast<double>(records.size());
  double mx = 0, me = 0;
  for (const auto& r : records) {
    mx += r.y_t;
    me += r.e;
  }
  mx /= n;
  me /= n;
  double sxx = 0, sxe = 0;
  for (const auto& r : records) {
    sxx += (r.y_t - mx) * (r.y_t - mx);
    sxe += (r.y_t - mx) * (r.e - me);
  }
  if (!(sxx > 0.0)) throw DegenerateError("residual_fit: all gold-standard values are identical");
  LinearFit fit;
  fit.slope = sxe / sxx;
  fit.intercept = me - fit.slope * mx;
  return fit;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  Summary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.std_defined = true;
  }
  return s;
}

}  // namespace fuse_ser
