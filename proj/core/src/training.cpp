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

#include "fuse_ser/training.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "fuse_ser/checkpoint.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/optim.hpp"

namespace fuse_ser {

namespace {

using nlohmann::json;

HeadKind head_for(const Task& task) {
  switch (task.kind) {
    case Task::Kind::kFourClass: return HeadKind::kClassification;
    case Task::Kind::kSingleTask: return HeadKind::kRegression;
    case Task::Kind::kMultitask: return HeadKind::kMultitaskRegression;
  }
  return HeadKind::kClassification;
}

SelectionMetric selection_for(const Task& task) {
  return task.is_classification() ? SelectionMetric::kUar : SelectionMetric::kCccMean;
}

template <typename F>
auto config_field(const char* field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field, e.what());
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

const char* to_string(LossKind loss) {
  switch (loss) {
    case LossKind::kWeightedCe: return "weighted_ce";
    case LossKind::kMse: return "mse";
    case LossKind::kCcc: return "ccc";
  }
  return "weighted_ce";
}

const char* to_string(SelectionMetric metric) {
  return metric == SelectionMetric::kUar ? "uar" : "ccc_mean";
}

LossKind parse_loss(std::string_view text) {
  if (text == "weighted_ce") return LossKind::kWeightedCe;
  if (text == "mse") return LossKind::kMse;
  if (text == "ccc") return LossKind::kCcc;
  throw InvalidArgument(fmt::format("unknown loss '{}'; expected weighted_ce, mse or ccc", text));
}

SelectionMetric parse_selection_metric(std::string_view text) {
  if (text == "uar") return SelectionMetric::kUar;
  if (text == "ccc_mean" || text == "ccc") return SelectionMetric::kCccMean;
  throw InvalidArgument(fmt::format("unknown selection metric '{}'; expected uar or ccc_mean", text));
}

void TrainRunConfig::validate() const {
  config_field("model", [&] { model.validate(); });
  if (epochs == 0) throw ConfigError("epochs", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be non-negative");
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  const bool ok = (loss == LossKind::kWeightedCe && task.kind == Task::Kind::kFourClass) ||
                  (loss == LossKind::kMse && task.kind == Task::Kind::kSingleTask) ||
                  (loss == LossKind::kCcc && task.kind != Task::Kind::kFourClass);
  if (!ok) {
    throw ConfigError("loss", fmt::format("loss '{}' cannot train task '{}' (weighted_ce requires four_class, mse "
                                          "requires single_task, ccc requires single_task or multitask)",
                                          to_string(loss), task.name()));
  }
  if (selection_metric != selection_for(task)) {
    throw ConfigError("selection_metric", fmt::format("'{}' does not apply to task '{}' (uar for four_class, ccc_mean "
                                                      "for regression)",
                                                      to_string(selection_metric), task.name()));
  }
  if (model.head != head_for(task)) {
    throw ConfigError("model.head", fmt::format("head '{}' does not match task '{}'", to_string(model.head), task.name()));
  }
  if (task.is_classification() && model.n_classes != kFourClassNames.size()) {
    throw ConfigError("model.n_classes", "four_class requires 4 classes");
  }
  if (loss == LossKind::kCcc && batch_size < 2) throw ConfigError("batch_size", "ccc loss needs batches of >= 2");
}

void to_json(json& j, const TrainRunConfig& c) {
  j = json{{"model", c.model},
           {"task", c.task.name()},
           {"loss", to_string(c.loss)},
           {"epochs", c.epochs},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"selection_metric", to_string(c.selection_metric)},
           {"ce_normalization", c.ce_normalization == CeNormalization::kBatchMean ? "batch_mean" : "weight_sum"},
           {"prefetch", c.prefetch}};
}

void from_json(const json& j, TrainRunConfig& c) {
  static const std::set<std::string> known{"model",     "task",           "loss",  "epochs",           "lr",
                                           "momentum",  "weight_decay",   "batch_size", "seed", "selection_metric",
                                           "ce_normalization", "prefetch"};
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(key, "unknown field");
  }
  c = TrainRunConfig{};
  c.task = config_field("task", [&] { return parse_task(j.value("task", std::string("four_class"))); });
  c.loss = config_field("loss", [&] {
    return j.contains("loss") ? parse_loss(j.at("loss").get<std::string>())
                              : (c.task.is_classification() ? LossKind::kWeightedCe : LossKind::kCcc);
  });
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (!m.is_object()) throw ConfigError("model", "expected an object");
    c.model = config_field("model", [&] { return m.get<ModelSpec>(); });
    if (!m.contains("head")) c.model.head = head_for(c.task);
  } else {
    c.model.head = head_for(c.task);
  }
  c.epochs = config_field("epochs", [&] { return j.value("epochs", c.epochs); });
  c.lr = config_field("lr", [&] { return j.value("lr", c.lr); });
  c.momentum = config_field("momentum", [&] { return j.value("momentum", c.momentum); });
  c.weight_decay = config_field("weight_decay", [&] { return j.value("weight_decay", c.weight_decay); });
  c.batch_size = config_field("batch_size", [&] { return j.value("batch_size", c.batch_size); });
  c.seed = config_field("seed", [&] { return j.value("seed", c.seed); });
  c.selection_metric = config_field("selection_metric", [&] {
    return j.contains("selection_metric") ? parse_selection_metric(j.at("selection_metric").get<std::string>())
                                          : selection_for(c.task);
  });
  c.ce_normalization = config_field("ce_normalization", [&] {
    const auto s = j.value("ce_normalization", std::string("batch_mean"));
    if (s == "batch_mean") return CeNormalization::kBatchMean;
    if (s == "weight_sum") return CeNormalization::kWeightSum;
    throw InvalidArgument(fmt::format("unknown value '{}'; expected batch_mean or weight_sum", s));
  });
  c.prefetch = config_field("prefetch", [&] { return j.value("prefetch", false); });
}

std::size_t select_best(std::span<const double> dev_metrics) {
  if (dev_metrics.empty()) throw InvalidArgument("select_best: empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_metrics.size(); ++i) {
    if (dev_metrics[i] > dev_metrics[best]) best = i;
  }
  return best;
}

double selection_value(Model<float>& model, const Dataset& dev, const TrainRunConfig& config) {
  try {
    return evaluate(model, dev, config.task, false, config.batch_size).headline;
  } catch (const DegenerateError& e) {
    spdlog::warn("dev metric undefined: {}", e.what());
    return -std::numeric_limits<double>::infinity();
  }
}

RunResult train(const TrainRunConfig& config, const Dataset& train_set, const Dataset& dev_set,
                const TrainOptions& options) {
  config.validate();
  if (train_set.size() == 0) throw InvalidArgument("train: empty training set");
  if (dev_set.size() == 0) throw InvalidArgument("train: empty dev set");
  check_compatible(config.model, config.task, train_set);
  check_compatible(config.model, config.task, dev_set);

  RunResult result;
  result.seed = config.seed;
  auto log = [&](const std::string& line) {
    if (options.log) {
      options.log(line);
    } else {
      spdlog::info("{}", line);
    }
  };

  Model<float> model(config.model, config.seed);
  model.set_requires_grad(true);
  std::vector<Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  SgdNesterov<float> optimizer(params, {config.lr, config.momentum, config.weight_decay});

  std::vector<double> weights;
  if (config.task.is_classification()) weights = class_weights(train_set.class_counts()).weights;

  auto compute_loss = [&](const Tensor& out, const Batch& batch) -> Tensor {
    switch (config.loss) {
      case LossKind::kWeightedCe: return weighted_cross_entropy(out, batch.labels, weights, config.ce_normalization);
      case LossKind::kMse: return mse_loss(out, batch.targets);
      case LossKind::kCcc: return ccc_loss(out, batch.targets);
    }
    throw InvalidArgument("unknown loss");
  };

  std::vector<double> dev_history;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto batches = make_batches(train_set.size(), config.batch_size, config.seed, epoch - 1, true);
    if (config.loss == LossKind::kCcc && batches.size() > 1 && batches.back().size() < 2) {
      // A one-sample batch has no CCC; fold it into its predecessor.
      auto last = batches.back();
      batches.pop_back();
      batches.back().insert(batches.back().end(), last.begin(), last.end());
    }
    auto make = [&](std::size_t k) { return collate(train_set, batches[k], config.task); };
    std::optional<Prefetcher<Batch>> prefetcher;
    if (config.prefetch) prefetcher.emplace(make, batches.size(), 1);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Batch batch = prefetcher ? *prefetcher->next() : make(b);
      auto out = model.forward(batch.x, batch.embedding, Mode::kTrain);
      auto loss = compute_loss(out, batch);
      const double value = static_cast<double>(loss.item());
      result.batch_losses.push_back(value);
      if (!std::isfinite(value)) {
        const std::size_t tail = std::min<std::size_t>(result.batch_losses.size(), 8);
        std::vector<double> trace(result.batch_losses.end() - static_cast<std::ptrdiff_t>(tail),
                                  result.batch_losses.end());
        throw NumericError(fmt::format("non-finite loss at epoch {}, batch {} (seed {}); recent losses: [{}]", epoch,
                                       b + 1, config.seed, fmt::join(trace, ", ")));
      }
      optimizer.zero_grad();
      backward(loss);
      optimizer.step();
      epoch_loss += value * static_cast<double>(batch.size());
    }
    epoch_loss /= static_cast<double>(train_set.size());

    const double dev = selection_value(model, dev_set, config);
    dev_history.push_back(dev);
    result.curves.push_back({epoch, epoch_loss, dev});
    const bool improved = epoch == 1 || dev > result.best_dev_metric;
    if (improved) {
      result.best_epoch = epoch;
      result.best_dev_metric = dev;
      result.best_model = std::make_shared<Model<float>>(model.clone());
      if (!options.checkpoint_path.empty()) {
        save_checkpoint(options.checkpoint_path, model,
                        json{{"task", config.task.name()},
                             {"epoch", epoch},
                             {"seed", config.seed},
                             {"selection_metric", to_string(config.selection_metric)},
                             {"dev_metric", dev},
                             {"config", config}});
        result.checkpoint_path = options.checkpoint_path.string();
      }
    }
    log(fmt::format("seed {} epoch {}/{} loss {:.6f} dev {} {:.4f}{}", config.seed, epoch, config.epochs, epoch_loss,
                    to_string(config.selection_metric), dev, improved ? " *" : ""));
  }
  result.best_dev_metric = dev_history[select_best(dev_history)];
  return result;
}

SeedsResult run_seeds(const TrainRunConfig& config, const Dataset& train_set, const Dataset& dev_set,
                      const Dataset* test_set, const SeedsOptions& options) {
  if (options.n_seeds == 0) throw InvalidArgument("run_seeds: n_seeds must be >= 1");
  config.validate();
  SeedsResult out;
  out.runs.resize(options.n_seeds);
  std::vector<std::exception_ptr> errors(options.n_seeds);
  const bool buffered = options.jobs > 1;

  auto run_one = [&](std::size_t k) {
    try {
      auto cfg = config;
      cfg.seed = options.base_seed + k;
      TrainOptions topts;
      std::string buffer;
      if (!options.run_dir.empty()) {
        const auto dir = options.run_dir / fmt::format("seed{}", cfg.seed);
        std::filesystem::create_directories(dir);
        topts.checkpoint_path = dir / "checkpoint.bin";
      }
      if (buffered) topts.log = [&buffer](const std::string& line) { buffer += line + '\n'; };
      SeedRun sr;
      sr.run = train(cfg, train_set, dev_set, topts);
      sr.run.log = std::move(buffer);
      if (test_set) sr.test = evaluate(*sr.run.best_model, *test_set, cfg.task, options.cross_corpus, cfg.batch_size);
      if (!options.run_dir.empty()) write_seed_artifacts(options.run_dir / fmt::format("seed{}", cfg.seed), sr, cfg);
      out.runs[k] = std::move(sr);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  if (!buffered) {
    for (std::size_t k = 0; k < options.n_seeds; ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(options.jobs, options.n_seeds);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (std::size_t k = next++; k < options.n_seeds; k = next++) run_one(k);
      });
    }
    for (auto& t : workers) t.join();
    for (const auto& r : out.runs) {
      if (!r.run.log.empty()) spdlog::info("\n{}", r.run.log);
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> dev;
  for (const auto& r : out.runs) {
    dev.push_back(r.run.best_dev_metric);
    out.values.push_back(r.test ? r.test->headline : r.run.best_dev_metric);
  }
  out.metric_key = test_set ? out.runs.front().test->headline_key : std::string("dev_") + to_string(config.selection_metric);
  out.summary = summarize(out.values);
  out.best_seed_index = select_best(dev);
  if (!options.run_dir.empty()) write_summary(options.run_dir, out, config);
  return out;
}

LosoResult run_loso(const TrainRunConfig& config, const FoldPlan& plan, const Dataset& data,
                    const LosoOptions& options) {
  if (plan.folds.empty()) throw InvalidArgument("run_loso: empty fold plan");
  LosoResult out;
  std::vector<double> fold_metrics, external_metrics;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    const auto idx = fold_indices(data.records, fold);
    if (idx.train.empty() || idx.dev.empty() || idx.test.empty()) {
      throw InvalidArgument(fmt::format("run_loso: fold {} (test speaker '{}') has an empty partition", f,
                                        fold.test_speaker));
    }
    const auto train_set = data.subset(idx.train);
    const auto dev_set = data.subset(idx.dev);
    const auto test_set = data.subset(idx.test);
    auto seeds_opts = options.seeds;
    if (!seeds_opts.run_dir.empty()) seeds_opts.run_dir = options.seeds.run_dir / fmt::format("fold{}", f);
    seeds_opts.cross_corpus = false;
    FoldResult fr;
    fr.fold = fold;
    fr.seeds = run_seeds(config, train_set, dev_set, &test_set, seeds_opts);
    fr.test_metric = fr.seeds.summary.mean;
    if (options.external_test) {
      std::vector<double> ext;
      for (auto& r : fr.seeds.runs) {
        ext.push_back(evaluate(*r.run.best_model, *options.external_test, config.task, true, config.batch_size).headline);
      }
      fr.external_metric = summarize(ext).mean;
      external_metrics.push_back(*fr.external_metric);
    }
    out.metric_key = fr.seeds.metric_key;
    fold_metrics.push_back(fr.test_metric);
    spdlog::info("fold {} (test {}, dev {}): {} {:.4f}", f, fold.test_speaker, fold.dev_speaker, out.metric_key,
                 fr.test_metric);
    out.folds.push_back(std::move(fr));
  }
  out.aggregate = summarize(fold_metrics).mean;
  if (!external_metrics.empty()) out.external_aggregate = summarize(external_metrics).mean;
  if (!options.seeds.run_dir.empty()) {
    json j{{"folds", json::array()}, {"metric_key", out.metric_key}, {"aggregate", out.aggregate}};
    for (std::size_t f = 0; f < out.folds.size(); ++f) {
      const auto& fr = out.folds[f];
      json fj{{"fold", f},
              {"test_speaker", fr.fold.test_speaker},
              {"dev_speaker", fr.fold.dev_speaker},
              {"train_speakers", fr.fold.train_speakers},
              {"test_metric", fr.test_metric}};
      if (fr.external_metric) fj["external_pcc_or_headline"] = *fr.external_metric;
      j["folds"].push_back(std::move(fj));
    }
    if (out.external_aggregate) j["external_aggregate"] = *out.external_aggregate;
    std::ofstream o(options.seeds.run_dir / "loso_summary.json", std::ios::binary);
    o << j.dump(2) << '\n';
  }
  return out;
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> data_keys{
      "name",          "manifest",          "embeddings",          "test_manifest", "test_embeddings",
      "external_manifest", "external_embeddings", "runs_dir",      "n_seeds",       "base_seed",
      "scale",         "four_class_corpus"};
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  ExperimentConfig c;
  json run = json::object();
  for (const auto& [key, value] : j.items()) {
    if (!data_keys.count(key)) run[key] = value;
  }
  c.run = run.get<TrainRunConfig>();
  auto path_field = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key)) return {};
    auto p = std::filesystem::path(config_field(key, [&] { return j.at(key).get<std::string>(); }));
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  c.name = config_field("name", [&] { return j.value("name", c.name); });
  if (c.name.empty() || c.name.find('/') != std::string::npos) throw ConfigError("name", "must be a plain directory name");
  c.manifest = path_field("manifest");
  if (c.manifest.empty()) throw ConfigError("manifest", "required");
  c.embeddings = path_field("embeddings");
  c.test_manifest = path_field("test_manifest");
  c.test_embeddings = path_field("test_embeddings");
  c.external_manifest = path_field("external_manifest");
  c.external_embeddings = path_field("external_embeddings");
  if (j.contains("runs_dir")) c.runs_dir = path_field("runs_dir");
  c.n_seeds = config_field("n_seeds", [&] { return j.value("n_seeds", c.n_seeds); });
  if (c.n_seeds == 0) throw ConfigError("n_seeds", "must be >= 1");
  c.base_seed = config_field("base_seed", [&] { return j.value("base_seed", c.base_seed); });
  if (j.contains("scale")) {
    auto s = config_field("scale", [&] { return j.at("scale").get<std::vector<double>>(); });
    if (s.size() != 2 || !(s[0] < s[1])) throw ConfigError("scale", "expected [lo, hi] with lo < hi");
    c.scale = {s[0], s[1]};
  }
  if (j.contains("four_class_corpus")) {
    c.four_class_corpus =
        config_field("four_class_corpus", [&] { return parse_corpus(j.at("four_class_corpus").get<std::string>()); });
  }
  c.run.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open config {}", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("<root>", fmt::format("invalid JSON in {}: {}", path.string(), e.what()));
  }
  return parse_experiment_config(j, path.parent_path());
}

void write_seed_artifacts(const std::filesystem::path& dir, const SeedRun& sr, const TrainRunConfig& config) {
  std::filesystem::create_directories(dir);
  json m{{"seed", sr.run.seed},
         {"best_epoch", sr.run.best_epoch},
         {"best_dev_metric", sr.run.best_dev_metric},
         {"selection_metric", to_string(config.selection_metric)},
         {"checkpoint", sr.run.checkpoint_path.empty() ? json(nullptr) : json("checkpoint.bin")}};
  if (sr.test) m["test"] = sr.test->to_json();
  {
    std::ofstream out(dir / "metrics.json", std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write {}", (dir / "metrics.json").string()));
    out << m.dump(2) << '\n';
  }
  std::ofstream curves(dir / "curves.csv", std::ios::binary);
  if (!curves) throw IoError(fmt::format("cannot write {}", (dir / "curves.csv").string()));
  curves << "epoch,train_loss,dev_" << to_string(config.selection_metric) << '\n';
  for (const auto& e : sr.run.curves) curves << fmt::format("{},{},{}\n", e.epoch, e.train_loss, e.dev_metric);
}

void write_summary(const std::filesystem::path& dir, const SeedsResult& result, const TrainRunConfig& config) {
  std::filesystem::create_directories(dir);
  json j{{"task", config.task.name()},
         {"fusion", to_string(config.model.fusion)},
         {"metric_key", result.metric_key},
         {"values", result.values},
         {"mean", result.summary.mean},
         {"std", result.summary.std},
         {"std_defined", result.summary.std_defined},
         {"n", result.summary.n},
         {"best_seed_index", result.best_seed_index},
         {"best_seed", result.runs[result.best_seed_index].run.seed},
         {"config", config},
         {"seeds", json::array()}};
  for (const auto& r : result.runs) {
    json s{{"seed", r.run.seed}, {"best_epoch", r.run.best_epoch}, {"best_dev_metric", r.run.best_dev_metric}};
    if (r.test) s["test"] = r.test->to_json();
    j["seeds"].push_back(std::move(s));
  }
  std::ofstream out(dir / "summary.json", std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", (dir / "summary.json").string()));
  out << j.dump(2) << '\n';
}

}  // namespace fuse_ser
