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

#include "fuse_ser/losses.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace fuse_ser {

ClassWeights class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw InvalidArgument("class_weights: no classes");
  std::size_t total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw InvalidArgument(fmt::format("class_weights: class {} has no samples; drop it from the label set", c));
    }
    total += counts[c];
  }
  ClassWeights out;
  out.counts.assign(counts.begin(), counts.end());
  const double k = static_cast<double>(counts.size());
  for (auto n : counts) out.weights.push_back(static_cast<double>(total) / (k * static_cast<double>(n)));
  return out;
}

template <typename T>
BasicTensor<T> weighted_cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels,
                                      std::span<const double> weights, CeNormalization normalization) {
  if (logits.rank() != 2) throw DimensionError("weighted_cross_entropy", "rank", "logits must be [N, K]");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("weighted_cross_entropy", "N", fmt::format("{} labels for {} rows", labels.size(), n));
  }
  if (weights.size() != k) {
    throw DimensionError("weighted_cross_entropy", "K", fmt::format("{} weights for {} classes", weights.size(), k));
  }
  auto x = logits.data();
  std::vector<double> probs(n * k);
  double total = 0.0, weight_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw InvalidArgument(fmt::format("weighted_cross_entropy: label {} at row {} outside [0, {})", y, i, k));
    }
    const T* row = x.data() + i * k;
    double mx = static_cast<double>(*std::max_element(row, row + k));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += (probs[i * k + c] = std::exp(static_cast<double>(row[c]) - mx));
    for (std::size_t c = 0; c < k; ++c) probs[i * k + c] /= z;
    const double log_p = static_cast<double>(row[y]) - mx - std::log(z);
    total += -weights[y] * log_p;
    weight_sum += weights[y];
  }
  const double denom = normalization == CeNormalization::kBatchMean ? static_cast<double>(n) : weight_sum;
  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<double> w(weights.begin(), weights.end());
  return detail::make_result<T>(
      "weighted_cross_entropy", Shape{1}, std::vector<T>{static_cast<T>(total / denom)}, {logits},
      [n, k, denom, probs = std::move(probs), ys = std::move(ys), w = std::move(w)](detail::Node<T>& self) {
        auto& ln = *self.inputs[0];
        const double g = static_cast<double>(self.grad[0]) / denom;
        for (std::size_t i = 0; i < n; ++i) {
          const double wi = w[ys[i]] * g;
          for (std::size_t c = 0; c < k; ++c) {
            const double d = probs[i * k + c] - (static_cast<int>(c) == ys[i] ? 1.0 : 0.0);
            ln.grad[i * k + c] += static_cast<T>(wi * d);
          }
        }
      });
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.numel() != target.numel()) {
    throw DimensionError("mse_loss", "N", fmt::format("{} predictions vs {} targets", pred.numel(), target.numel()));
  }
  if (pred.numel() == 0) throw InvalidArgument("mse_loss: empty input");
  const std::size_t n = pred.numel();
  auto p = pred.data();
  auto t = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    total += d * d;
  }
  return detail::make_result<T>("mse_loss", Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(n))},
                                {pred, target}, [n](detail::Node<T>& self) {
                                  auto& pn = *self.inputs[0];
                                  auto& tn = *self.inputs[1];
                                  const double g = static_cast<double>(self.grad[0]) * 2.0 / static_cast<double>(n);
                                  for (std::size_t i = 0; i < n; ++i) {
                                    const double d = static_cast<double>(pn.data[i]) - static_cast<double>(tn.data[i]);
                                    if (pn.requires_grad) pn.grad[i] += static_cast<T>(g * d);
                                    if (tn.requires_grad) tn.grad[i] -= static_cast<T>(g * d);
                                  }
                                });
}

namespace {

struct Moments {
  double mean_x = 0, mean_y = 0, var_x = 0, var_y = 0, cov = 0;

  double denominator() const { return var_x + var_y + (mean_x - mean_y) * (mean_x - mean_y); }
};

template <typename Get>
Moments moments(std::size_t n, Get get) {
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    auto [x, y] = get(i);
    m.mean_x += x;
    m.mean_y += y;
  }
  m.mean_x /= static_cast<double>(n);
  m.mean_y /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [x, y] = get(i);
    const double dx = x - m.mean_x, dy = y - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  m.var_x /= static_cast<double>(n);
  m.var_y /= static_cast<double>(n);
  m.cov /= static_cast<double>(n);
  return m;
}

}  // namespace

double ccc(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("ccc", "N", fmt::format("{} predictions vs {} targets", pred.size(), target.size()));
  }
  if (pred.size() < 2) throw InvalidArgument("ccc: need at least 2 values");
  const auto m = moments(pred.size(), [&](std::size_t i) { return std::pair{pred[i], target[i]}; });
  const double den = m.denominator();
  if (!(den > 0.0)) throw DegenerateError("ccc: both series are constant with equal means");
  return 2.0 * m.cov / den;
}

template <typename T>
BasicTensor<T> ccc_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("ccc_loss", "all", to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  if (pred.rank() > 2 || pred.rank() == 0) throw DimensionError("ccc_loss", "rank", "expected [N] or [N, D]");
  const std::size_t n = pred.dim(0);
  const std::size_t d = pred.rank() == 2 ? pred.dim(1) : 1;
  if (n < 2) throw InvalidArgument("ccc_loss: batch needs at least 2 rows");
  auto p = pred.data();
  auto t = target.data();
  std::vector<Moments> stats(d);
  double loss = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    stats[j] = moments(n, [&](std::size_t i) {
      return std::pair{static_cast<double>(p[i * d + j]), static_cast<double>(t[i * d + j])};
    });
    const double den = stats[j].denominator();
    if (!(den > 0.0)) {
      throw DegenerateError(fmt::format("ccc_loss: degenerate batch statistics in column {}", j));
    }
    loss += 1.0 - 2.0 * stats[j].cov / den;
  }
  loss /= static_cast<double>(d);
  return detail::make_result<T>(
      "ccc_loss", Shape{1}, std::vector<T>{static_cast<T>(loss)}, {pred, target},
      [n, d, stats = std::move(stats)](detail::Node<T>& self) {
        auto& pn = *self.inputs[0];
        auto& tn = *self.inputs[1];
        const double g = static_cast<double>(self.grad[0]) / static_cast<double>(d);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
          const auto& m = stats[j];
          const double num = 2.0 * m.cov;
          const double den = m.denominator();
          const double shift = m.mean_x - m.mean_y;
          for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(pn.data[i * d + j]);
            const double y = static_cast<double>(tn.data[i * d + j]);
            // d(ccc)/dx_i and d(ccc)/dy_i; the loss is -(1/D) * ccc.
            const double dnum_x = 2.0 * (y - m.mean_y) * inv_n;
            const double dden_x = 2.0 * (x - m.mean_x) * inv_n + 2.0 * shift * inv_n;
            const double dnum_y = 2.0 * (x - m.mean_x) * inv_n;
            const double dden_y = 2.0 * (y - m.mean_y) * inv_n - 2.0 * shift * inv_n;
            if (pn.requires_grad) pn.grad[i * d + j] -= static_cast<T>(g * (dnum_x * den - num * dden_x) / (den * den));
            if (tn.requires_grad) tn.grad[i * d + j] -= static_cast<T>(g * (dnum_y * den - num * dden_y) / (den * den));
          }
        }
      });
}

template BasicTensor<float> weighted_cross_entropy(const BasicTensor<float>&, std::span<const int>,
                                                   std::span<const double>, CeNormalization);
template BasicTensor<double> weighted_cross_entropy(const BasicTensor<double>&, std::span<const int>,
                                                    std::span<const double>, CeNormalization);
template BasicTensor<float> mse_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> mse_loss(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> ccc_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> ccc_loss(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace fuse_ser
