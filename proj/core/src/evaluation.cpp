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

#include "fuse_ser/evaluation.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>

#include "fuse_ser/csv.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/losses.hpp"
#include "fuse_ser/ops.hpp"

namespace fuse_ser {

namespace {

std::string fmt_double(double v) { return fmt::format("{}", v); }

template <typename F>
std::optional<double> guarded(F&& f, const char* what, Dimension d) {
  try {
    return f();
  } catch (const DegenerateError& e) {
    spdlog::warn("{} undefined for {}: {}", what, to_string(d), e.what());
    return std::nullopt;
  }
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::vector<double> Predictions::target_column(std::size_t d) const {
  const std::size_t dims = task.num_targets();
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = targets[i * dims + d];
  return out;
}

std::vector<double> Predictions::output_column(std::size_t d) const {
  const std::size_t dims = task.num_targets();
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = outputs[i * dims + d];
  return out;
}

void check_compatible(const ModelSpec& spec, const Task& task, const Dataset& data) {
  if (task.is_classification()) {
    if (spec.head != HeadKind::kClassification || spec.n_classes != kFourClassNames.size()) {
      throw InvalidArgument(fmt::format("model head '{}' with {} outputs cannot serve task '{}'", to_string(spec.head),
                                        spec.output_dim(), task.name()));
    }
  } else if (spec.head == HeadKind::kClassification || spec.output_dim() != task.num_targets()) {
    throw InvalidArgument(fmt::format("model head '{}' with {} outputs cannot serve task '{}'", to_string(spec.head),
                                      spec.output_dim(), task.name()));
  }
  if (spec.uses_embedding()) {
    if (!data.has_embeddings()) {
      throw InvalidArgument(fmt::format("{} model needs linguistic embeddings but the data has none", to_string(spec.fusion)));
    }
    if (data.embedding_dim() != spec.embedding_dim) {
      throw InvalidArgument(fmt::format("model expects {}-dimensional embeddings, data has {}", spec.embedding_dim,
                                        data.embedding_dim()));
    }
  }
  if (data.size() && data.n_mels() != spec.n_mels) {
    throw InvalidArgument(fmt::format("model expects {} mel bands, data has {}", spec.n_mels, data.n_mels()));
  }
}

Predictions predict(Model<float>& model, const Dataset& data, const Task& task, std::size_t batch_size) {
  check_compatible(model.spec(), task, data);
  NoGradGuard no_grad;
  Predictions out;
  out.task = task;
  const std::size_t k = model.spec().output_dim();
  for (const auto& idx : make_batches(data.size(), batch_size, 0, 0, false)) {
    auto batch = collate(data, idx, task);
    auto y = model.forward(batch.x, batch.embedding, Mode::kEval);
    auto values = y.data();
    std::vector<double> rows(values.begin(), values.end());
    for (std::size_t r = 0; r < idx.size(); ++r) out.ids.push_back(data.records[idx[r]].id);
    if (task.is_classification()) {
      auto probs = softmax_rows(rows, k);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
          if (rows[r * k + c] > rows[r * k + best]) best = c;
        }
        out.predicted.push_back(static_cast<int>(best));
        out.truth.push_back(batch.labels[r]);
      }
      out.probabilities.insert(out.probabilities.end(), probs.begin(), probs.end());
    } else {
      out.outputs.insert(out.outputs.end(), rows.begin(), rows.end());
      auto t = batch.targets.data();
      out.targets.insert(out.targets.end(), t.begin(), t.end());
    }
  }
  return out;
}

EvalReport evaluate(const Predictions& p, bool cross_corpus) {
  EvalReport report;
  report.task = p.task;
  report.cross_corpus = cross_corpus;
  report.num_samples = p.size();
  if (p.task.is_classification()) {
    report.confusion = ConfusionMatrix::from_labels(p.truth, p.predicted, kFourClassNames.size());
    report.uar = uar(*report.confusion);
    report.headline_key = "uar";
    report.headline = *report.uar;
    return report;
  }
  const auto dims = p.task.dimensions();
  double ccc_sum = 0.0, pcc_sum = 0.0;
  bool ccc_ok = true, pcc_ok = true;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto y = p.target_column(d);
    const auto yhat = p.output_column(d);
    DimensionReport dr;
    dr.dimension = dims[d];
    dr.ccc = guarded([&] { return ccc(yhat, y); }, "ccc", dims[d]);
    dr.pcc = guarded([&] { return pcc(yhat, y); }, "pcc", dims[d]);
    dr.mse = mse(yhat, y);
    try {
      dr.residual_fit = residual_fit(make_residuals(y, yhat));
    } catch (const DegenerateError& e) {
      spdlog::warn("residual fit undefined for {}: {}", to_string(dims[d]), e.what());
    }
    if (dr.ccc) ccc_sum += *dr.ccc; else ccc_ok = false;
    if (dr.pcc) pcc_sum += *dr.pcc; else pcc_ok = false;
    report.dimensions.push_back(dr);
  }
  const auto n = static_cast<double>(dims.size());
  if (cross_corpus) {
    if (!pcc_ok) throw DegenerateError("evaluate: PCC undefined for at least one dimension (constant predictions)");
    report.headline_key = "pcc";
    report.headline = pcc_sum / n;
  } else {
    if (!ccc_ok) throw DegenerateError("evaluate: CCC undefined for at least one dimension");
    report.headline_key = "ccc";
    report.headline = ccc_sum / n;
  }
  return report;
}

EvalReport evaluate(Model<float>& model, const Dataset& data, const Task& task, bool cross_corpus,
                    std::size_t batch_size) {
  return evaluate(predict(model, data, task, batch_size), cross_corpus);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["task"] = task.name();
  j["cross_corpus"] = cross_corpus;
  j["headline_key"] = headline_key;
  j["headline"] = headline;
  j[headline_key] = headline;
  j["num_samples"] = num_samples;
  if (uar) j["uar"] = *uar;
  if (confusion) {
    j["confusion"] = {{"classes", confusion->classes()}, {"counts", confusion->counts()}};
    std::vector<std::string> names(kFourClassNames.begin(), kFourClassNames.end());
    j["class_names"] = names;
  }
  if (!dimensions.empty()) {
    auto& dims = j["dimensions"] = nlohmann::json::array();
    for (const auto& d : dimensions) {
      nlohmann::json dj{{"dimension", to_string(d.dimension)},
                        {"ccc", optional_json(d.ccc)},
                        {"pcc", optional_json(d.pcc)},
                        {"mse", d.mse}};
      if (d.residual_fit) {
        dj["residual_fit"] = {{"slope", d.residual_fit->slope}, {"intercept", d.residual_fit->intercept}};
      } else {
        dj["residual_fit"] = nullptr;
      }
      dims.push_back(std::move(dj));
    }
  }
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.task = parse_task(j.at("task").get<std::string>());
    r.cross_corpus = j.value("cross_corpus", false);
    r.headline_key = j.at("headline_key").get<std::string>();
    r.headline = j.at("headline").get<double>();
    r.num_samples = j.value("num_samples", std::size_t{0});
    r.uar = optional_from(j, "uar");
    if (j.contains("confusion")) {
      const auto& c = j.at("confusion");
      r.confusion = ConfusionMatrix(c.at("classes").get<std::size_t>(), c.at("counts").get<std::vector<std::size_t>>());
    }
    if (j.contains("dimensions")) {
      for (const auto& dj : j.at("dimensions")) {
        DimensionReport d;
        d.dimension = parse_dimension(dj.at("dimension").get<std::string>());
        d.ccc = optional_from(dj, "ccc");
        d.pcc = optional_from(dj, "pcc");
        d.mse = dj.at("mse").get<double>();
        if (dj.contains("residual_fit") && !dj.at("residual_fit").is_null()) {
          d.residual_fit = LinearFit{dj.at("residual_fit").at("slope").get<double>(),
                                     dj.at("residual_fit").at("intercept").get<double>()};
        }
        r.dimensions.push_back(d);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metrics.json", 0, e.what());
  }
  return r;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  std::vector<std::string> header{"true\\predicted"};
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    header.emplace_back(c < kFourClassNames.size() ? std::string(kFourClassNames[c]) : std::to_string(c));
  }
  write_csv_row(out, header);
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    std::vector<std::string> row{header[r + 1]};
    for (std::size_t c = 0; c < cm.classes(); ++c) row.push_back(std::to_string(cm.at(r, c)));
    write_csv_row(out, row);
  }
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  CsvReader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row) || row.size() < 2) throw ParseError(path.string(), 1, "missing header");
  const std::size_t k = row.size() - 1;
  std::vector<std::size_t> counts;
  for (std::size_t r = 0; r < k; ++r) {
    if (!reader.next(row) || row.size() != k + 1) throw ParseError(path.string(), reader.line(), "malformed row");
    for (std::size_t c = 1; c <= k; ++c) {
      double v = 0;
      if (!parse_double(row[c], v) || v < 0) throw ParseError(path.string(), reader.line(), "bad count");
      counts.push_back(static_cast<std::size_t>(v));
    }
  }
  return ConfusionMatrix(k, std::move(counts));
}

void write_report(const std::filesystem::path& dir, const EvalReport& report, const Predictions& p) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.json", std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write {}", (dir / "metrics.json").string()));
    out << report.to_json().dump(2) << '\n';
  }
  std::ofstream pred(dir / "predictions.csv", std::ios::binary);
  if (!pred) throw IoError(fmt::format("cannot write {}", (dir / "predictions.csv").string()));
  if (p.task.is_classification()) {
    write_csv_row(pred, {"id", "true", "predicted"});
    for (std::size_t i = 0; i < p.size(); ++i) {
      write_csv_row(pred, {p.ids[i], std::string(kFourClassNames[static_cast<std::size_t>(p.truth[i])]),
                           std::string(kFourClassNames[static_cast<std::size_t>(p.predicted[i])])});
    }
    if (report.confusion) write_confusion_csv(dir / "confusion.csv", *report.confusion);
    return;
  }
  const auto dims = p.task.dimensions();
  std::vector<std::string> header{"id"};
  for (auto d : dims) {
    header.push_back(std::string("true_") + to_string(d));
    header.push_back(std::string("pred_") + to_string(d));
  }
  write_csv_row(pred, header);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<std::string> row{p.ids[i]};
    for (std::size_t d = 0; d < dims.size(); ++d) {
      row.push_back(fmt_double(p.targets[i * dims.size() + d]));
      row.push_back(fmt_double(p.outputs[i * dims.size() + d]));
    }
    write_csv_row(pred, row);
  }
  std::ofstream res(dir / "residuals.csv", std::ios::binary);
  if (!res) throw IoError(fmt::format("cannot write {}", (dir / "residuals.csv").string()));
  write_csv_row(res, {"id", "dimension", "y_t", "y_p", "e"});
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto records = make_residuals(p.target_column(d), p.output_column(d));
    for (std::size_t i = 0; i < records.size(); ++i) {
      write_csv_row(res, {p.ids[i], to_string(dims[d]), fmt_double(records[i].y_t), fmt_double(records[i].y_p),
                          fmt_double(records[i].e)});
    }
  }
}

}  // namespace fuse_ser
