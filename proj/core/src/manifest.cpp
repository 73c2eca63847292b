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

#include "fuse_ser/manifest.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include "fuse_ser/csv.hpp"
#include "fuse_ser/error.hpp"
#include "fuse_ser/random.hpp"

namespace fuse_ser {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string format_optional(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string{};
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  const auto s = lower(text);
  if (s == "train") return Split::kTrain;
  if (s == "dev" || s == "valid" || s == "validation") return Split::kDev;
  if (s == "test") return Split::kTest;
  if (s.empty() || s == "unassigned") return Split::kUnassigned;
  throw InvalidArgument(fmt::format("unknown split '{}'", text));
}

const char* to_string(Dimension dim) {
  switch (dim) {
    case Dimension::kArousal: return "arousal";
    case Dimension::kValence: return "valence";
    case Dimension::kDominance: return "dominance";
  }
  return "arousal";
}

Dimension parse_dimension(std::string_view text) {
  const auto s = lower(text);
  if (s == "arousal") return Dimension::kArousal;
  if (s == "valence") return Dimension::kValence;
  if (s == "dominance") return Dimension::kDominance;
  throw InvalidArgument(fmt::format("unknown dimension '{}'", text));
}

std::optional<int> four_class_index(std::string_view emotion) {
  const auto s = lower(emotion);
  for (std::size_t i = 0; i < kFourClassNames.size(); ++i) {
    if (s == kFourClassNames[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::size_t Task::num_targets() const {
  switch (kind) {
    case Kind::kFourClass: return 0;
    case Kind::kSingleTask: return 1;
    case Kind::kMultitask: return kNumDimensions;
  }
  return 0;
}

std::vector<Dimension> Task::dimensions() const {
  switch (kind) {
    case Kind::kFourClass: return {};
    case Kind::kSingleTask: return {dimension};
    case Kind::kMultitask: return {Dimension::kArousal, Dimension::kValence, Dimension::kDominance};
  }
  return {};
}

std::string Task::name() const {
  switch (kind) {
    case Kind::kFourClass: return "four_class";
    case Kind::kSingleTask: return std::string("single_task:") + to_string(dimension);
    case Kind::kMultitask: return "multitask";
  }
  return "four_class";
}

Task parse_task(std::string_view text) {
  const auto s = lower(text);
  Task task;
  if (s == "four_class" || s == "classification") return task;
  if (s == "multitask") {
    task.kind = Task::Kind::kMultitask;
    return task;
  }
  std::string_view dim = s;
  constexpr std::string_view prefix = "single_task:";
  if (dim.starts_with(prefix)) dim.remove_prefix(prefix.size());
  task.kind = Task::Kind::kSingleTask;
  try {
    task.dimension = parse_dimension(dim);
  } catch (const InvalidArgument&) {
    throw InvalidArgument(fmt::format("unknown task '{}'; expected four_class, multitask or single_task:<dimension>", text));
  }
  return task;
}

std::optional<double> UtteranceRecord::dimension(Dimension d) const {
  switch (d) {
    case Dimension::kArousal: return arousal;
    case Dimension::kValence: return valence;
    case Dimension::kDominance: return dominance;
  }
  return std::nullopt;
}

void validate_records(std::span<const UtteranceRecord> records, ScaleBounds scale, std::string_view source) {
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::size_t row = i + 2;  // header is line 1
    if (r.id.empty()) throw ParseError(std::string(source), row, "empty id");
    if (!seen.insert(r.id).second) throw ParseError(std::string(source), row, fmt::format("duplicate id '{}'", r.id));
    if (r.audio_path.empty() && r.feature_path.empty()) {
      throw ParseError(std::string(source), row, fmt::format("'{}' has neither audio_path nor feature_path", r.id));
    }
    for (auto d : {Dimension::kArousal, Dimension::kValence, Dimension::kDominance}) {
      const auto v = r.dimension(d);
      if (v && !(*v >= scale.lo && *v <= scale.hi)) {
        throw ParseError(std::string(source), row,
                         fmt::format("{} = {} outside the scale [{}, {}]", to_string(d), *v, scale.lo, scale.hi));
      }
    }
  }
}

std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path, ScaleBounds scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open manifest {}", path.string()));
  const std::string source = path.string();
  CsvReader reader(in);
  std::vector<std::string> row;
  if (!reader.next(row)) throw ParseError(source, 1, "empty manifest");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < row.size(); ++i) col[row[i]] = i;
  for (std::string_view name : {"id", "speaker_id", "session_id"}) {
    if (!col.count(std::string(name))) throw ParseError(source, 1, fmt::format("missing column '{}'", name));
  }
  const std::size_t width = row.size();
  auto field = [&](const std::vector<std::string>& r, const char* name) -> std::string {
    auto it = col.find(name);
    return it == col.end() ? std::string{} : r[it->second];
  };

  std::vector<UtteranceRecord> records;
  std::vector<std::size_t> lines;
  while (reader.next(row)) {
    const std::size_t line = reader.line();
    if (row.size() != width) {
      throw ParseError(source, line, fmt::format("expected {} fields, found {}", width, row.size()));
    }
    UtteranceRecord r;
    r.id = field(row, "id");
    r.audio_path = field(row, "audio_path");
    r.feature_path = field(row, "feature_path");
    if (auto t = field(row, "transcript"); col.count("transcript")) r.transcript = std::move(t);
    r.speaker_id = field(row, "speaker_id");
    r.session_id = field(row, "session_id");
    if (auto e = field(row, "emotion"); !e.empty()) r.emotion = std::move(e);
    for (auto d : {Dimension::kArousal, Dimension::kValence, Dimension::kDominance}) {
      auto text = field(row, to_string(d));
      if (text.empty()) continue;
      double v = 0.0;
      if (!parse_double(text, v) || !std::isfinite(v)) {
        throw ParseError(source, line, fmt::format("{} is not a number: '{}'", to_string(d), text));
      }
      (d == Dimension::kArousal ? r.arousal : d == Dimension::kValence ? r.valence : r.dominance) = v;
    }
    try {
      r.split = parse_split(field(row, "split"));
    } catch (const InvalidArgument& e) {
      throw ParseError(source, line, e.what());
    }
    records.push_back(std::move(r));
    lines.push_back(line);
  }
  try {
    validate_records(records, scale, source);
  } catch (const ParseError& e) {
    // validate_records reports index + 2; translate to the physical line.
    const std::size_t idx = e.line() >= 2 ? e.line() - 2 : 0;
    std::string what = e.what();
    const auto pos = what.find(": ", source.size());
    throw ParseError(source, idx < lines.size() ? lines[idx] : e.line(),
                     pos == std::string::npos ? what : what.substr(pos + 2));
  }
  log_manifest_summary(records);
  return records;
}

void save_manifest(const std::filesystem::path& path, std::span<const UtteranceRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write manifest {}", path.string()));
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    write_csv_row(out, {r.id, r.audio_path, r.feature_path, r.transcript.value_or(""), r.speaker_id, r.session_id,
                        r.emotion.value_or(""), format_optional(r.arousal), format_optional(r.valence),
                        format_optional(r.dominance), to_string(r.split)});
  }
  if (!out) throw IoError(fmt::format("failed writing manifest {}", path.string()));
}

void log_manifest_summary(std::span<const UtteranceRecord> records) {
  std::map<std::string, std::size_t> classes;
  std::map<std::string, std::size_t> splits;
  for (const auto& r : records) {
    ++classes[r.emotion.value_or("<none>")];
    ++splits[to_string(r.split)];
  }
  std::string cls, spl;
  for (const auto& [k, v] : classes) cls += fmt::format(" {}={}", k, v);
  for (const auto& [k, v] : splits) spl += fmt::format(" {}={}", k, v);
  spdlog::debug("manifest: {} records; classes:{}; splits:{}", records.size(), cls, spl);
}

Corpus parse_corpus(std::string_view text) {
  const auto s = lower(text);
  if (s == "msp" || s == "msp-podcast" || s == "msp_podcast") return Corpus::kMsp;
  if (s == "iemocap") return Corpus::kIemocap;
  throw InvalidArgument(fmt::format("unknown corpus '{}'; expected msp or iemocap", text));
}

std::vector<UtteranceRecord> four_class_filter(std::span<const UtteranceRecord> records, Corpus corpus) {
  std::vector<UtteranceRecord> out;
  for (const auto& r : records) {
    if (!r.emotion) continue;
    std::string label = lower(*r.emotion);
    if (corpus == Corpus::kIemocap && label == "excited") label = "happy";
    if (!four_class_index(label)) continue;
    auto copy = r;
    copy.emotion = label;
    out.push_back(std::move(copy));
  }
  if (out.empty()) spdlog::warn("four_class_filter: no records left after filtering");
  return out;
}

std::vector<UtteranceRecord> select_split(std::span<const UtteranceRecord> records, Split split) {
  std::vector<UtteranceRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

void assign_splits_by_hash(std::span<UtteranceRecord> records, double train_fraction, double dev_fraction) {
  if (train_fraction < 0 || dev_fraction < 0 || train_fraction + dev_fraction > 1.0) {
    throw InvalidArgument("assign_splits_by_hash: fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = fnv1a(records[a].id), hb = fnv1a(records[b].id);
    return ha != hb ? ha < hb : records[a].id < records[b].id;
  });
  const auto n = static_cast<double>(records.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
  const auto n_dev = static_cast<std::size_t>(std::llround(n * (train_fraction + dev_fraction))) - n_train;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    records[order[rank]].split = rank < n_train ? Split::kTrain : rank < n_train + n_dev ? Split::kDev : Split::kTest;
  }
}

FoldPlan loso_folds(std::span<const UtteranceRecord> records) {
  std::map<std::string, std::set<std::string>> sessions;
  std::map<std::string, std::string> speaker_session;
  for (const auto& r : records) {
    if (r.speaker_id.empty() || r.session_id.empty()) {
      throw InvalidArgument(fmt::format("loso_folds: record '{}' lacks speaker_id or session_id", r.id));
    }
    auto [it, inserted] = speaker_session.emplace(r.speaker_id, r.session_id);
    if (!inserted && it->second != r.session_id) {
      throw InvalidArgument(fmt::format("loso_folds: speaker '{}' appears in sessions '{}' and '{}'", r.speaker_id,
                                        it->second, r.session_id));
    }
    sessions[r.session_id].insert(r.speaker_id);
  }
  if (sessions.empty()) throw InvalidArgument("loso_folds: no records");
  for (const auto& [session, speakers] : sessions) {
    if (speakers.size() != 2) {
      throw InvalidArgument(
          fmt::format("loso_folds: session '{}' has {} speakers; exactly 2 are required", session, speakers.size()));
    }
  }
  FoldPlan plan;
  for (const auto& [session, speakers] : sessions) {
    for (const auto& test : speakers) {
      Fold fold;
      fold.test_speaker = test;
      for (const auto& s : speakers) {
        if (s != test) fold.dev_speaker = s;
      }
      for (const auto& [other, others] : sessions) {
        if (other == session) continue;
        fold.train_speakers.insert(fold.train_speakers.end(), others.begin(), others.end());
      }
      if (fold.train_speakers.empty()) {
        throw InvalidArgument(fmt::format(
            "loso_folds: fold for speaker '{}' has an empty training set; at least two sessions are required", test));
      }
      plan.folds.push_back(std::move(fold));
    }
  }
  return plan;
}

FoldIndices fold_indices(std::span<const UtteranceRecord> records, const Fold& fold) {
  const std::set<std::string> train(fold.train_speakers.begin(), fold.train_speakers.end());
  FoldIndices out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = records[i].speaker_id;
    if (s == fold.test_speaker) {
      out.test.push_back(i);
    } else if (s == fold.dev_speaker) {
      out.dev.push_back(i);
    } else if (train.count(s)) {
      out.train.push_back(i);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch, bool shuffle) {
  if (batch_size == 0) throw InvalidArgument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (shuffle) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)), RngStream::kShuffle);
    fuse_ser::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace fuse_ser
