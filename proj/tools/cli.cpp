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

#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "fuse_ser/audio.hpp"
#include "fuse_ser/checkpoint.hpp"
#include "fuse_ser/dataset.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/evaluation.hpp"
#include "fuse_ser/gradcheck.hpp"
#include "fuse_ser/manifest.hpp"
#include "fuse_ser/metrics.hpp"
#include "fuse_ser/stats.hpp"
#include "fuse_ser/tensor.hpp"
#include "fuse_ser/training.hpp"

namespace fuse_ser::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Fractions internally; UAR renders as percent.
std::string render(const std::string& key, double value) {
  if (key == "uar" || key == "dev_uar") return fmt::format("{:.2f}", 100.0 * value);
  return fmt::format("{:.3f}", value);
}

std::string render_summary(const std::string& key, const Summary& s) {
  return fmt::format("{}: {} ({})", upper(key), render(key, s.mean), render(key, s.std));
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

Dataset apply_four_class(Dataset data, Corpus corpus) {
  const auto kept = four_class_filter(data.records, corpus);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) index[data.records[i].id] = i;
  std::vector<std::size_t> idx;
  for (const auto& r : kept) idx.push_back(index.at(r.id));
  auto out = data.subset(idx);
  for (std::size_t i = 0; i < kept.size(); ++i) out.records[i].emotion = kept[i].emotion;
  return out;
}

// ---------------------------------------------------------------- synth-data

struct SynthArgs {
  std::string out;
  SynthSpec spec;
};

int cmd_synth_data(const SynthArgs& a, std::ostream& out) {
  auto data = synth_bimodal_dataset(a.spec);
  assign_splits_by_hash(data.records);
  save_dataset(a.out, data);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : data.records) ++counts[to_string(r.split)];
  out << fmt::format("wrote {} utterances to {} (train {}, dev {}, test {})\n", data.size(), a.out, counts["train"],
                     counts["dev"], counts["test"]);
  return kSuccess;
}

// ----------------------------------------------------------------- featurize

struct FeaturizeArgs {
  std::string manifest;
  std::string out;
  FrontendConfig frontend;
};

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out, std::ostream& err) {
  a.frontend.validate();
  auto records = load_manifest(a.manifest);
  const fs::path base = fs::path(a.manifest).parent_path();
  const fs::path out_dir(a.out);
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base / path : path;
  };
  const bool all_done = std::all_of(records.begin(), records.end(), [&](const UtteranceRecord& r) {
    return !r.feature_path.empty() && fs::exists(resolve(r.feature_path));
  });
  if (all_done) {
    out << fmt::format("manifest {} is already featurized; nothing to do\n", a.manifest);
    return kSuccess;
  }
  fs::create_directories(out_dir / "features");
  std::vector<std::string> failed;
  std::size_t written = 0;
  for (auto& r : records) {
    if (!r.feature_path.empty() && fs::exists(resolve(r.feature_path))) {
      r.feature_path = fs::absolute(resolve(r.feature_path)).string();
      continue;
    }
    try {
      if (r.audio_path.empty()) throw InvalidArgument("no audio_path");
      const auto wave = read_wav(resolve(r.audio_path));
      const auto mel = log_mel(wave, a.frontend);
      const auto rel = (fs::path("features") / (r.id + ".feat")).generic_string();
      write_features(out_dir / rel, mel.frames);
      r.feature_path = rel;
      if (!r.audio_path.empty() && fs::path(r.audio_path).is_relative()) {
        r.audio_path = fs::absolute(resolve(r.audio_path)).string();
      }
      ++written;
    } catch (const Error& e) {
      err << fmt::format("featurize: '{}': {}\n", r.id, e.what());
      failed.push_back(r.id);
    }
  }
  save_manifest(out_dir / "manifest.csv", records);
  write_json(out_dir / "frontend.json", json(a.frontend));
  out << fmt::format("featurized {} utterances into {}\n", written, a.out);
  if (!failed.empty()) {
    err << fmt::format("featurize: {} utterance(s) failed: {}\n", failed.size(), fmt::join(failed, ", "));
    return kRuntimeError;
  }
  return kSuccess;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  bool loso = false;
  bool force = false;
  std::size_t jobs = 1;
  std::string name;
};

Dataset load_data(const fs::path& manifest, const fs::path& embeddings, const ExperimentConfig& c) {
  auto data = load_dataset(manifest, embeddings, c.scale);
  if (c.four_class_corpus) data = apply_four_class(std::move(data), *c.four_class_corpus);
  return data;
}

void print_regression_breakdown(const SeedsResult& r, std::ostream& out) {
  if (r.runs.empty() || !r.runs.front().test || r.runs.front().test->dimensions.empty()) return;
  const auto& first = *r.runs.front().test;
  for (std::size_t d = 0; d < first.dimensions.size(); ++d) {
    std::vector<double> ccc_v, pcc_v;
    for (const auto& run : r.runs) {
      const auto& dr = run.test->dimensions[d];
      if (dr.ccc) ccc_v.push_back(*dr.ccc);
      if (dr.pcc) pcc_v.push_back(*dr.pcc);
    }
    const char* name = to_string(first.dimensions[d].dimension);
    if (!ccc_v.empty()) out << fmt::format("  {} {}\n", name, render_summary("ccc", summarize(ccc_v)));
    if (!pcc_v.empty()) out << fmt::format("  {} {}\n", name, render_summary("pcc", summarize(pcc_v)));
  }
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  auto config = load_experiment_config(a.config);
  if (!a.name.empty()) config.name = a.name;
  const fs::path run_dir = config.runs_dir / config.name;
  if (fs::exists(run_dir)) {
    if (!a.force) {
      throw ConfigError("name", fmt::format("run directory {} exists; pass --force to replace it", run_dir.string()));
    }
    fs::remove_all(run_dir);
  }
  fs::create_directories(run_dir);
  write_json(run_dir / "config.json", json::parse(std::ifstream(a.config, std::ios::binary)));

  auto data = load_data(config.manifest, config.embeddings, config);
  SeedsOptions seeds;
  seeds.n_seeds = config.n_seeds;
  seeds.base_seed = config.base_seed;
  seeds.jobs = std::max<std::size_t>(1, a.jobs);
  seeds.run_dir = run_dir;

  if (a.loso) {
    const auto plan = loso_folds(data.records);
    LosoOptions lopts;
    lopts.seeds = seeds;
    std::optional<Dataset> external;
    if (!config.external_manifest.empty()) {
      external = load_data(config.external_manifest, config.external_embeddings, config);
      lopts.external_test = &*external;
    }
    const auto result = run_loso(config.run, plan, data, lopts);
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
      const auto& fr = result.folds[f];
      out << fmt::format("fold {} (test {}, dev {}): {} {}\n", f, fr.fold.test_speaker, fr.fold.dev_speaker,
                         upper(result.metric_key), render(result.metric_key, fr.test_metric));
    }
    std::vector<double> fold_values;
    for (const auto& fr : result.folds) fold_values.push_back(fr.test_metric);
    out << render_summary(result.metric_key, summarize(fold_values)) << '\n';
    if (result.external_aggregate) {
      std::vector<double> ext;
      for (const auto& fr : result.folds) ext.push_back(*fr.external_metric);
      const std::string key = config.run.task.is_classification() ? "uar" : "pcc";
      out << "external " << render_summary(key, summarize(ext)) << '\n';
    }
    return kSuccess;
  }

  const auto train_set = data.split(Split::kTrain);
  const auto dev_set = data.split(Split::kDev);
  std::optional<Dataset> test_set;
  if (!config.test_manifest.empty()) {
    test_set = load_data(config.test_manifest, config.test_embeddings, config);
  } else if (auto t = data.split(Split::kTest); t.size()) {
    test_set = std::move(t);
  }
  const auto result = run_seeds(config.run, train_set, dev_set, test_set ? &*test_set : nullptr, seeds);
  for (std::size_t k = 0; k < result.runs.size(); ++k) {
    const auto& r = result.runs[k].run;
    out << fmt::format("seed {}: best epoch {}, {} {}\n", r.seed, r.best_epoch, upper(result.metric_key),
                       render(result.metric_key, result.values[k]));
  }
  out << render_summary(result.metric_key, result.summary);
  if (!result.summary.std_defined) out << " [single seed: std not defined]";
  out << '\n';
  print_regression_breakdown(result, out);
  out << fmt::format("best seed (dev): {}\n", result.runs[result.best_seed_index].run.seed);
  return kSuccess;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
  std::string checkpoint;
  std::string manifest;
  std::string embeddings;
  std::string out;
  std::string task;
  bool cross_corpus = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  auto ckpt = load_checkpoint(a.checkpoint);
  Task task;
  if (!a.task.empty()) {
    task = parse_task(a.task);
  } else if (ckpt.meta.contains("task")) {
    task = parse_task(ckpt.meta.at("task").get<std::string>());
  } else {
    throw ConfigError("task", "checkpoint does not record its task; pass --task");
  }
  const auto data = load_dataset(a.manifest, a.embeddings);
  const auto predictions = predict(ckpt.model, data, task);
  const auto report = evaluate(predictions, a.cross_corpus);
  const fs::path dir = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "eval" : fs::path(a.out);
  write_report(dir, report, predictions);
  out << fmt::format("{}: {} on {} utterances\n", upper(report.headline_key), render(report.headline_key, report.headline),
                     report.num_samples);
  for (const auto& d : report.dimensions) {
    out << fmt::format("  {}: ccc {} pcc {} mse {:.4f}\n", to_string(d.dimension),
                       d.ccc ? fmt::format("{:.3f}", *d.ccc) : "n/a", d.pcc ? fmt::format("{:.3f}", *d.pcc) : "n/a",
                       d.mse);
  }
  out << fmt::format("report written to {}\n", dir.string());
  return kSuccess;
}

// ------------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> runs;
  std::vector<std::string> baselines;
  bool welch = false;
  std::string out;
};

struct RunGroup {
  std::string name;
  json summary;
  std::vector<double> values;
  std::string metric_key;
  std::string task;
  std::optional<EvalReport> best_report;
};

RunGroup load_group(const fs::path& dir) {
  RunGroup g;
  g.name = dir.filename().string();
  if (g.name.empty()) g.name = dir.parent_path().filename().string();
  g.summary = read_json(dir / "summary.json");
  try {
    g.values = g.summary.at("values").get<std::vector<double>>();
    g.metric_key = g.summary.at("metric_key").get<std::string>();
    g.task = g.summary.at("task").get<std::string>();
    const auto best = g.summary.at("best_seed_index").get<std::size_t>();
    const auto& seed = g.summary.at("seeds").at(best);
    if (seed.contains("test")) g.best_report = EvalReport::from_json(seed.at("test"));
  } catch (const json::exception& e) {
    throw ParseError((dir / "summary.json").string(), 0, e.what());
  }
  return g;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  static constexpr std::array<const char*, 4> kMarkers{"*", "†", "‡", "§"};
  if (a.runs.size() < 2) throw ConfigError("runs", "need at least 2 run directories");
  if (a.baselines.empty()) throw ConfigError("baseline", "name at least one baseline run");
  if (a.baselines.size() > kMarkers.size()) throw ConfigError("baseline", "at most 4 baselines");
  std::vector<RunGroup> groups;
  for (const auto& r : a.runs) groups.push_back(load_group(r));
  for (const auto& g : groups) {
    if (g.task != groups.front().task || g.metric_key != groups.front().metric_key) {
      throw InvalidArgument(fmt::format("analyze: run '{}' has task {} / metric {}, but '{}' has {} / {}", g.name, g.task,
                                        g.metric_key, groups.front().name, groups.front().task,
                                        groups.front().metric_key));
    }
  }
  std::vector<const RunGroup*> baselines;
  for (const auto& b : a.baselines) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const RunGroup& g) { return g.name == b; });
    if (it == groups.end()) throw ConfigError("baseline", fmt::format("'{}' is not one of the run directories", b));
    baselines.push_back(&*it);
  }
  const auto kind = a.welch ? TTestKind::kWelch : TTestKind::kStudent;
  const std::string key = groups.front().metric_key;
  json report{{"metric_key", key}, {"task", groups.front().task}, {"groups", json::array()}};

  out << fmt::format("{:<24} {:>18}  markers\n", "run", upper(key) + " mean (std)");
  for (const auto& g : groups) {
    const auto s = summarize(g.values);
    std::string markers;
    json gj{{"name", g.name}, {"values", g.values}, {"mean", s.mean}, {"std", s.std}, {"tests", json::array()}};
    for (std::size_t b = 0; b < baselines.size(); ++b) {
      if (g.values.size() < 2 || baselines[b]->values.size() < 2) continue;
      const auto t = ttest_independent(g.values, baselines[b]->values, kind);
      if (t.significant && g.name != baselines[b]->name) markers += kMarkers[b];
      gj["tests"].push_back({{"baseline", baselines[b]->name},
                             {"t", std::isfinite(t.t) ? json(t.t) : json(nullptr)},
                             {"p", t.p},
                             {"df", t.df},
                             {"significant", t.significant && g.name != baselines[b]->name},
                             {"p_limit_zero", t.p_limit_zero}});
      out << fmt::format("    vs {}: t = {}, p = {:.4g}\n", baselines[b]->name,
                         std::isfinite(t.t) ? fmt::format("{:.3f}", t.t) : std::string(t.t > 0 ? "inf" : "-inf"), t.p);
    }
    gj["markers"] = markers;
    out << fmt::format("{:<24} {:>18}  {}\n", g.name, fmt::format("{} ({})", render(key, s.mean), render(key, s.std)),
                       markers);
    report["groups"].push_back(std::move(gj));
  }
  for (std::size_t b = 0; b < baselines.size(); ++b) {
    out << fmt::format("{} p < 0.05 against {} ({} t-test)\n", kMarkers[b], baselines[b]->name,
                       a.welch ? "Welch" : "Student");
  }

  const auto& base = *baselines.front();
  if (groups.front().task == "four_class") {
    if (!base.best_report || !base.best_report->confusion) {
      throw InvalidArgument(fmt::format("analyze: baseline '{}' has no test confusion matrix", base.name));
    }
    for (const auto& g : groups) {
      if (&g == &base || !g.best_report || !g.best_report->confusion) continue;
      const auto delta = confusion_delta(*g.best_report->confusion, *base.best_report->confusion);
      const std::size_t k = g.best_report->confusion->classes();
      out << fmt::format("\nconfusion % change, {} vs {} (best seeds; rows true, columns predicted)\n", g.name,
                         base.name);
      out << fmt::format("{:>10}", "");
      for (std::size_t c = 0; c < k; ++c) out << fmt::format("{:>10}", kFourClassNames[c]);
      out << '\n';
      json grid = json::array();
      for (std::size_t r = 0; r < k; ++r) {
        out << fmt::format("{:>10}", kFourClassNames[r]);
        json row = json::array();
        for (std::size_t c = 0; c < k; ++c) {
          const auto& cell = delta[r * k + c];
          out << fmt::format("{:>10}", cell ? fmt::format("{:+.0f}%", *cell) : std::string("n/a"));
          row.push_back(cell ? json(*cell) : json("n/a"));
        }
        out << '\n';
        grid.push_back(std::move(row));
      }
      report["confusion_delta"][g.name] = std::move(grid);
    }
  } else {
    out << fmt::format("\nresidual fits e = slope * y_t + intercept (best seeds)\n");
    out << fmt::format("{:<24} {:<10} {:>10} {:>10}\n", "run", "dimension", "slope", "intercept");
    for (const auto& g : groups) {
      if (!g.best_report) continue;
      for (const auto& d : g.best_report->dimensions) {
        if (!d.residual_fit) continue;
        out << fmt::format("{:<24} {:<10} {:>10.4f} {:>10.4f}\n", g.name, to_string(d.dimension), d.residual_fit->slope,
                           d.residual_fit->intercept);
        report["residual_fits"][g.name][to_string(d.dimension)] = {{"slope", d.residual_fit->slope},
                                                                    {"intercept", d.residual_fit->intercept}};
      }
    }
  }
  if (!a.out.empty()) write_json(a.out, report);
  return kSuccess;
}

// ----------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string spec = "tiny";
  std::string corrupt;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto scale = parse_gradcheck_scale(a.spec);
  detail::set_corrupt_backward_op(a.corrupt);
  const auto start = std::chrono::steady_clock::now();
  std::vector<GradcheckResult> results;
  try {
    results = run_gradcheck_suite(scale);
  } catch (...) {
    detail::set_corrupt_backward_op("");
    throw;
  }
  detail::set_corrupt_backward_op("");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t failures = 0;
  for (const auto& r : results) {
    out << fmt::format("{} {:<34} worst rel err {:.3e}  probes {:>5}  kink crossings {:>3}\n", r.passed ? "PASS" : "FAIL",
                       r.name, r.max_rel_error, r.probes, r.kink_crossings);
    if (!r.passed) ++failures;
  }
  out << fmt::format("{} of {} checks passed in {:.1f} s\n", results.size() - failures, results.size(), seconds);
  return failures ? kRuntimeError : kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-text fusion for speech emotion recognition", "fuse-ser"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate the synthetic bimodal 4-class dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n-per-class", synth.spec.n_per_class, "Utterances per class")->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise, "Spectrogram noise std")->capture_default_str();
  synth_cmd->add_option("--frames", synth.spec.frames, "Frames per utterance")->capture_default_str();
  synth_cmd->add_option("--n-mels", synth.spec.n_mels, "Mel bands")->capture_default_str();
  synth_cmd->add_option("--embedding-dim", synth.spec.embedding_dim, "Embedding dimension")->capture_default_str();
  synth_cmd->add_option("--id-prefix", synth.spec.id_prefix, "Utterance id prefix")->capture_default_str();

  FeaturizeArgs feat;
  auto* feat_cmd = app.add_subcommand("featurize", "Compute log-mel features for a manifest");
  feat_cmd->add_option("--manifest", feat.manifest, "Input manifest")->required();
  feat_cmd->add_option("--out", feat.out, "Output directory")->required();
  feat_cmd->add_option("--sample-rate", feat.frontend.sample_rate, "Expected sample rate (Hz)")->capture_default_str();
  feat_cmd->add_option("--window-ms", feat.frontend.window_ms, "Window length (ms)")->capture_default_str();
  feat_cmd->add_option("--hop-ms", feat.frontend.hop_ms, "Hop length (ms)")->capture_default_str();
  feat_cmd->add_option("--n-mels", feat.frontend.n_mels, "Mel bands")->capture_default_str();
  feat_cmd->add_option("--f-min", feat.frontend.f_min, "Lowest filter edge (Hz)")->capture_default_str();
  feat_cmd->add_option("--f-max", feat.frontend.f_max, "Highest filter edge (Hz); 0 = Nyquist")->capture_default_str();
  feat_cmd->add_option("--max-duration", feat.frontend.max_duration_s, "Crop/pad to seconds; 0 = off")
      ->capture_default_str();
  feat_cmd->add_flag("--normalize", feat.frontend.normalize, "Per-utterance mean/variance normalization");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train over seeds, or over LOSO folds");
  train_cmd->add_option("--config", train_args.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_flag("--loso", train_args.loso, "Leave-one-speaker-out cross-validation");
  train_cmd->add_flag("--force", train_args.force, "Replace an existing run directory");
  train_cmd->add_option("--jobs", train_args.jobs, "Concurrent runs")->envname("FUSE_SER_JOBS")->capture_default_str();
  train_cmd->add_option("--name", train_args.name, "Override the run name");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest")->required();
  eval_cmd->add_option("--embeddings", eval.embeddings, "Embedding CSV");
  eval_cmd->add_option("--out", eval.out, "Report directory (default: <checkpoint dir>/eval)");
  eval_cmd->add_option("--task", eval.task, "Override the task stored in the checkpoint");
  eval_cmd->add_flag("--cross-corpus", eval.cross_corpus, "Report PCC as the headline regression metric");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compare run groups with significance tests");
  analyze_cmd->add_option("--runs", analyze.runs, "Run directories")->required()->expected(1, -1);
  analyze_cmd->add_option("--baseline", analyze.baselines, "Baseline run name(s)")->required()->expected(1, -1);
  analyze_cmd->add_flag("--welch", analyze.welch, "Welch's unequal-variance t-test");
  analyze_cmd->add_option("--out", analyze.out, "Write the comparison as JSON");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad_cmd->add_option("--spec", grad.spec, "tiny or default")->capture_default_str();
  grad_cmd->add_option("--corrupt", grad.corrupt)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kUsageError;
  }

  const auto previous_level = spdlog::get_level();
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);
  int code = kSuccess;
  try {
    if (*synth_cmd) code = cmd_synth_data(synth, out);
    else if (*feat_cmd) code = cmd_featurize(feat, out, err);
    else if (*train_cmd) code = cmd_train(train_args, out);
    else if (*eval_cmd) code = cmd_evaluate(eval, out);
    else if (*analyze_cmd) code = cmd_analyze(analyze, out);
    else if (*grad_cmd) code = cmd_gradcheck(grad, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    code = kUsageError;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    code = kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kRuntimeError;
  }
  spdlog::set_level(previous_level);
  return code;
}

}  // namespace fuse_ser::cli
