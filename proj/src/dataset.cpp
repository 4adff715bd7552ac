// Copyright 2026 The maskgrid Authors
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

#include "maskgrid/dataset.hpp"

#include <filesystem>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/json_fields.hpp"
#include "maskgrid/metrics.hpp"
#include "maskgrid/parallel.hpp"

namespace maskgrid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

json task_json(const SyntheticTaskSpec& t) {
  return json{{"rule", rule_name(t.rule)},
              {"length", t.length},
              {"levels", t.levels},
              {"vocab", t.vocab},
              {"symbols", t.symbols},
              {"clip_frames", t.clip_frames},
              {"clip_channels", t.clip_channels},
              {"s3d_channels", t.s3d_channels},
              {"beats_channels", t.beats_channels},
              {"phase_period", t.phase_period},
              {"noise", t.noise},
              {"seed", t.seed}};
}

SyntheticTaskSpec parse_task(const json& j, const std::string& where) {
  SyntheticTaskSpec t;
  JsonFields f(j, where);
  std::string rule = rule_name(t.rule);
  f.get("rule", rule);
  try {
    t.rule = parse_rule(rule);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ".rule: " + e.what());
  }
  f.get("length", t.length);
  f.get("levels", t.levels);
  f.get("vocab", t.vocab);
  f.get("symbols", t.symbols);
  f.get("clip_frames", t.clip_frames);
  f.get("clip_channels", t.clip_channels);
  f.get("s3d_channels", t.s3d_channels);
  f.get("beats_channels", t.beats_channels);
  f.get("phase_period", t.phase_period);
  f.get("noise", t.noise);
  f.get("seed", t.seed);
  f.finish();
  t.validate();
  return t;
}

std::string example_stem(const std::string& dir, int index, int count) {
  return (fs::path(dir) / split_of(index, count) / std::to_string(index)).string();
}

}  // namespace

SplitSizes split_sizes(int count) {
  require_arg(count >= 0, "negative dataset size");
  const int train = count * 8 / 10;
  const int valid = count * 9 / 10 - train;
  return {train, valid, count - train - valid};
}

std::string split_of(int index, int count) {
  const SplitSizes s = split_sizes(count);
  require_arg(index >= 0 && index < count, "example index out of range");
  if (index < s.train) return "train";
  if (index < s.train + s.valid) return "valid";
  return "test";
}

std::string task_to_json(const SyntheticTaskSpec& task) { return task_json(task).dump(2); }

SyntheticTaskSpec task_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("task: ") + e.what());
  }
  return parse_task(j, "task");
}

void gen_dataset(const std::string& dir, const SyntheticTaskSpec& task, int count, int threads) {
  require_arg(count >= 1, "dataset needs at least one example");
  const SyntheticTask gen(task);
  std::error_code ec;
  for (const char* split : {"train", "valid", "test"}) {
    fs::create_directories(fs::path(dir) / split, ec);
    if (ec) throw IoError("cannot create dataset directory " + (fs::path(dir) / split).string() + ": " + ec.message());
  }
  const json manifest{{"version", kManifestVersion}, {"task", task_json(task)}, {"count", count}};
  io::write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    const SyntheticExample ex = gen.make(i);
    const std::string stem = example_stem(dir, static_cast<int>(i), count);
    save_codegram(stem + ".codegram", ex.codegram);
    for (const auto& s : ex.bundle.streams)
      save_embeddings(stem + "." + s.name + ".emb", EmbeddingSet{s.features, role_name(s.role)});
    save_embeddings(stem + ".beats.emb", EmbeddingSet{ex.beats, "beats-like"});
  });
}

DatasetManifest read_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.json").string();
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  JsonFields f(j, path);
  int version = 0;
  f.get("version", version);
  if (version != kManifestVersion) throw ConfigError(path + ": unsupported manifest version " + std::to_string(version));
  DatasetManifest m;
  const json* task = f.child("task");
  if (!task) throw ConfigError(path + ": missing 'task'");
  m.task = parse_task(*task, path + ".task");
  f.get("count", m.count);
  f.finish();
  if (m.count < 1) throw ConfigError(path + ": count must be >= 1");
  return m;
}

namespace {

DatasetExample read_example(const std::string& dir, const DatasetManifest& m, const SyntheticTask& gen,
                            int index) {
  const std::string stem = example_stem(dir, index, m.count);
  DatasetExample ex;
  ex.index = index;
  ex.codegram = load_codegram(stem + ".codegram");
  if (!ex.codegram.spec().same_grid(m.task.codebook()) || ex.codegram.length() != m.task.length)
    throw FormatError(stem + ".codegram does not match the manifest grid");
  for (const auto& s : gen.stream_specs()) {
    EmbeddingSet e = load_embeddings(stem + "." + s.name + ".emb");
    if (e.vectors.rows() != s.frames || e.vectors.cols() != s.channels)
      throw FormatError(stem + "." + s.name + ".emb has the wrong shape");
    ex.bundle.streams.push_back(ConditioningStream{s.name, s.role, std::move(e.vectors)});
  }
  ex.beats = load_embeddings(stem + ".beats.emb").vectors;
  if (ex.beats.rows() != m.task.length || ex.beats.cols() != m.task.beats_channels)
    throw FormatError(stem + ".beats.emb has the wrong shape");
  return ex;
}

}  // namespace

DatasetExample load_example(const std::string& dir, int index) {
  const DatasetManifest m = read_manifest(dir);
  return read_example(dir, m, SyntheticTask(m.task), index);
}

std::vector<DatasetExample> load_split(const std::string& dir, const std::string& split) {
  if (split != "train" && split != "valid" && split != "test")
    throw InvalidArgument("unknown split '" + split + "'");
  const DatasetManifest m = read_manifest(dir);
  const SyntheticTask gen(m.task);
  std::vector<DatasetExample> out;
  for (int i = 0; i < m.count; ++i)
    if (split_of(i, m.count) == split) out.push_back(read_example(dir, m, gen, i));
  return out;
}

}  // namespace maskgrid
