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

#include <filesystem>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/experiment.hpp"

namespace maskgrid {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("maskgrid_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_file(e.path().string());
  return out;
}

TEST(Splits, EightyTenTenByIndex) {
  const SplitSizes s = split_sizes(10);
  EXPECT_EQ(s.train, 8);
  EXPECT_EQ(s.valid, 1);
  EXPECT_EQ(s.test, 1);
  EXPECT_EQ(split_of(7, 10), "train");
  EXPECT_EQ(split_of(8, 10), "valid");
  EXPECT_EQ(split_of(9, 10), "test");
  for (int n = 1; n < 300; ++n) {
    const SplitSizes t = split_sizes(n);
    ASSERT_EQ(t.train + t.valid + t.test, n);
    ASSERT_EQ(t.train, n * 8 / 10);
  }
  EXPECT_THROW(split_of(10, 10), InvalidArgument);
}

TEST(SyntheticTask, SameSeedSameExamples) {
  SyntheticTaskSpec spec;
  spec.seed = 4;
  const SyntheticTask a(spec), b(spec);
  for (int i = 0; i < 20; ++i) {
    const auto x = a.make(i), y = b.make(i);
    ASSERT_EQ(x.codegram, y.codegram);
    ASSERT_TRUE(x.bundle.streams[0].features == y.bundle.streams[0].features);
    ASSERT_TRUE(x.beats == y.beats);
  }
  spec.seed = 5;
  EXPECT_NE(SyntheticTask(spec).make(0).codegram, a.make(0).codegram);
}

TEST(SyntheticTask, DeterministicMapIsAFunctionOfConditioning) {
  SyntheticTaskSpec spec;
  spec.symbols = 2;
  spec.clip_frames = 2;
  spec.seed = 9;
  const SyntheticTask task(spec);
  std::vector<SyntheticExample> ex;
  for (int i = 0; i < 40; ++i) ex.push_back(task.make(i));
  int collisions = 0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_EQ(ex[i].codegram, ex[i].clean);
    for (std::size_t j = i + 1; j < ex.size(); ++j) {
      bool same = true;
      for (std::size_t s = 0; s < 2; ++s)
        same = same && ex[i].bundle.streams[s].features == ex[j].bundle.streams[s].features;
      if (same) {
        ++collisions;
        ASSERT_EQ(ex[i].codegram, ex[j].codegram);
      }
    }
  }
  EXPECT_GT(collisions, 0);
}

TEST(SyntheticTask, NoisyMapKeepsCleanAnswerAndNoiseRate) {
  SyntheticTaskSpec det;
  det.seed = 11;
  SyntheticTaskSpec noisy = det;
  noisy.rule = TaskRule::noisy_map;
  noisy.noise = 0.3;
  const SyntheticTask a(det), b(noisy);
  int alternate = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto x = a.make(i), y = b.make(i);
    ASSERT_EQ(y.clean, x.codegram);
    alternate += y.codegram != y.clean;
  }
  // Binomial(1000, 0.3): sd ~ 14.5, so +-60 is beyond four sigma.
  EXPECT_NEAR(alternate, 300, 60);
}

TEST(SyntheticTask, EventOnsetsChangeTokensOnlyAtImpulses) {
  SyntheticTaskSpec spec;
  spec.rule = TaskRule::event_onsets;
  spec.seed = 12;
  const SyntheticTask task(spec);
  int changes = 0;
  for (int i = 0; i < 50; ++i) {
    const auto ex = task.make(i);
    const Mat& s3d = ex.bundle.streams[1].features;
    EXPECT_EQ(s3d(0, 0), 1.0);
    for (int l = 1; l < spec.length; ++l) {
      bool same = true;
      for (int k = 0; k < spec.levels; ++k) same = same && ex.codegram.at(l, k) == ex.codegram.at(l - 1, k);
      if (s3d(l, 0) == 0.0) ASSERT_TRUE(same) << "example " << i << " step " << l;
      changes += !same;
    }
  }
  EXPECT_GT(changes, 0);
}

TEST(SyntheticTask, FeaturesAndRendering) {
  SyntheticTaskSpec spec;
  const SyntheticTask task(spec);
  const auto ex = task.make(3);
  EXPECT_EQ(ex.bundle.streams[0].features.rows(), spec.clip_frames);
  EXPECT_EQ(ex.bundle.streams[1].features.rows(), spec.length);
  EXPECT_EQ(ex.beats.rows(), spec.length);
  EXPECT_TRUE(ex.beats == task.beats_features(ex.codegram));
  for (Eigen::Index i = 0; i < ex.beats.size(); ++i)
    ASSERT_EQ(ex.beats.data()[i], static_cast<double>(static_cast<float>(ex.beats.data()[i])));
  EXPECT_EQ(task.render(ex.codegram).size(), static_cast<std::size_t>(spec.length) * 512);
}

TEST(Dataset, ReproducibleAndLoadsBack) {
  SyntheticTaskSpec spec;
  spec.seed = 21;
  const auto d1 = scratch("d1"), d2 = scratch("d2");
  gen_dataset(d1.string(), spec, 10, 1);
  gen_dataset(d2.string(), spec, 10, 3);
  EXPECT_EQ(read_tree(d1), read_tree(d2));
  EXPECT_TRUE(fs::exists(d1 / "train" / "0.codegram"));
  EXPECT_TRUE(fs::exists(d1 / "valid" / "8.clip.emb"));
  EXPECT_TRUE(fs::exists(d1 / "test" / "9.beats.emb"));

  const auto m = read_manifest(d1.string());
  EXPECT_EQ(m.count, 10);
  EXPECT_EQ(m.task, spec);
  EXPECT_EQ(load_split(d1.string(), "train").size(), 8u);
  EXPECT_EQ(load_split(d1.string(), "valid").size(), 1u);
  const auto test = load_split(d1.string(), "test");
  ASSERT_EQ(test.size(), 1u);
  const auto ex = SyntheticTask(spec).make(9);
  EXPECT_EQ(test[0].index, 9);
  EXPECT_EQ(test[0].codegram, ex.codegram);
  EXPECT_TRUE(test[0].bundle.streams[1].features == ex.bundle.streams[1].features);
  EXPECT_TRUE(test[0].beats == ex.beats);
  EXPECT_THROW(load_split(d1.string(), "dev"), InvalidArgument);
  EXPECT_THROW(read_manifest((d1 / "missing").string()), IoError);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Config, RoundTripAndStrictParsing) {
  ExperimentConfig c;
  c.seed = 77;
  c.task.rule = TaskRule::noisy_map;
  c.hidden = 24;
  c.train.total_steps = 123;
  c.sampler.gamma = 2.5;
  c.eval.beams = 3;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.task, c.task);
  EXPECT_EQ(back.model_config(), c.model_config());

  EXPECT_NO_THROW(config_from_json(R"({"version": 1})"));
  EXPECT_THROW(config_from_json(R"({"seed": 1})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 2})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 1, "colour": 1})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 1, "train": {"peak_lr": 1, "lr": 2}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 1, "train": {"total_steps": "many"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 1, "task": {"rule": "random"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"version": 1, "model": {"hidden": 30, "heads": 4}})"), ConfigError);
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
}

TEST(Config, SeedFansOutToTask) {
  ExperimentConfig a, b;
  b.seed = 1;
  EXPECT_NE(a.resolved_task().seed, b.resolved_task().seed);
  EXPECT_EQ(a.resolved_task().seed, derive_seed(0, "task"));
}

TEST(Checkpoint, RoundTripAndStructureMismatch) {
  ExperimentConfig c;
  c.hidden = 16;
  c.depth = 1;
  const Model model(c.model_config());
  const Scav scav(c.scav_config());
  const Checkpoint ck{c, model.init_params(1), scav.init_params(2)};
  const auto dir = scratch("ckpt");
  save_checkpoint(dir.string(), ck);
  const Checkpoint back = load_checkpoint(dir.string());
  EXPECT_EQ(back.model_params, ck.model_params);
  EXPECT_EQ(back.scav_params, ck.scav_params);

  ExperimentConfig wider = c;
  wider.hidden = 24;
  io::write_file((dir / "config.json").string(), config_to_json(wider));
  EXPECT_THROW(load_checkpoint(dir.string()), FormatError);
  fs::remove_all(dir);
}

TEST(TrainLog, CsvLayout) {
  TrainLogRow r;
  r.step = 3;
  r.loss.l_mask = 0.5;
  r.loss.lr = 1e-3;
  r.loss.accuracy = 0.25;
  const std::string csv = train_log_csv({r});
  EXPECT_EQ(csv, "step,l_mask,l_mse,l_cont,lr,accuracy\n3,0.5,0,0,0.001,0.25\n");
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  ExperimentConfig c;
  c.seed = 3;
  c.count = 30;
  c.hidden = 16;
  c.depth = 1;
  c.train.total_steps = 20;
  c.train.batch_size = 4;
  c.scav_train.steps = 10;
  c.scav_train.batch_size = 4;
  c.sampler.n_steps = 6;
  c.eval.beams = 2;
  c.eval.max_examples = 2;
  std::ostringstream log;
  const auto w1 = scratch("p1"), w2 = scratch("p2");
  const std::string r1 = run_pipeline(c, w1.string(), 1, log).to_text();
  const std::string r2 = run_pipeline(c, w2.string(), 4, log).to_text();
  EXPECT_EQ(r1, r2);
  for (const char* key : {"l_mask_tail=", "masked_accuracy=", "exact_match_rate=", "fd_mfcc=", "novelty_score=",
                          "selection_hit_rate="})
    EXPECT_NE(r1.find(key), std::string::npos) << key;
  EXPECT_EQ(io::read_file((w1 / "train_log.csv").string()), io::read_file((w2 / "train_log.csv").string()));
  fs::remove_all(w1);
  fs::remove_all(w2);
}

}  // namespace
}  // namespace maskgrid
