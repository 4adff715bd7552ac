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

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "maskgrid/dataset.hpp"
#include "maskgrid/model.hpp"
#include "maskgrid/sampler.hpp"
#include "maskgrid/selector.hpp"
#include "maskgrid/trainer.hpp"

namespace maskgrid {

struct EvalConfig {
  int beams = 4;
  int max_examples = 0;    // test examples to sample, 0 = whole split
  int novelty_kernel = 8;
  int selection_candidates = 10;  // planted-match trials: 1 match + decoys
};

/// Everything a run depends on. Task geometry fixes the model's codebook,
/// stream list and sequence limits, so those are not configurable
/// separately.
struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 0;
  int count = 200;
  SyntheticTaskSpec task;
  Structure structure = Structure::seq2seq;
  int hidden = 32;
  int heads = 4;
  int depth = 2;
  int encoder_depth = 1;
  int mlp_ratio = 2;
  double cond_dropout_prob = 0.10;
  TrainConfig train;
  SamplerConfig sampler;
  ScavConfig scav;
  ScavTrainConfig scav_train;
  EvalConfig eval;

  ExperimentConfig();
  ModelConfig model_config() const;
  /// Task seed and component seeds fanned out from `seed`.
  SyntheticTaskSpec resolved_task() const;
  ScavConfig scav_config() const;
  void validate() const;
};

/// Pretty JSON including the version field.
std::string config_to_json(const ExperimentConfig& config);
/// Strict parse: unknown keys and a missing or wrong version raise ConfigError.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct TrainLogRow {
  int step = 0;
  LossBreakdown loss;
};
std::string train_log_csv(const std::vector<TrainLogRow>& rows);

/// Minibatches drawn uniformly with replacement from `examples`.
std::vector<TrainLogRow> train_model(const Model& model, ParamVector& params,
                                     const std::vector<TrainExample>& examples,
                                     const TrainConfig& config, std::uint64_t seed,
                                     const std::function<void(const TrainLogRow&)>& progress = {});

// Checkpoint directory: config.json, model.ckpt, scav.ckpt.
struct Checkpoint {
  ExperimentConfig config;
  ParamVector model_params;
  ParamVector scav_params;
};
void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

struct PipelineReport {
  std::uint64_t seed = 0;
  int train_examples = 0;
  int test_examples = 0;
  int train_steps = 0;
  double l_mask_tail = 0.0;
  double masked_accuracy = 0.0;
  double exact_match_rate = 0.0;
  double fd_mfcc = 0.0;
  double novelty = 0.0;
  double selection_hit_rate = 0.0;
  double scav_loss_tail = 0.0;
  std::string to_text() const;  // key=value lines followed by a table
};

/// gen-data -> train -> sample (B beams) -> select -> eval inside `workdir`.
/// Progress goes to `log`; the returned report does not depend on `threads`.
PipelineReport run_pipeline(const ExperimentConfig& config, const std::string& workdir, int threads,
                            std::ostream& log);

}  // namespace maskgrid
