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
#include <optional>
#include <span>
#include <vector>

#include "maskgrid/codegram.hpp"
#include "maskgrid/conditioning.hpp"
#include "maskgrid/model.hpp"
#include "maskgrid/rng.hpp"

namespace maskgrid {

/// One paired training example.
struct TrainExample {
  Codegram codegram;
  ConditioningBundle bundle;
  Mat aux_targets;  // beats-like features, N_beats x aux_channels (seq2seq/hybrid)
};

struct TrainConfig {
  double lambda_reg = 1.0;
  double lambda_cont = 1.0;
  double peak_lr = 2e-4;
  double floor_lr = 1e-6;
  int warmup_steps = 100;
  int total_steps = 10000;
  double decay_power = 1.0;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  int batch_size = 16;
  int threads = 1;
};

/// Linear warmup from 0 to peak over warmup_steps, then polynomial decay to
/// floor at total_steps; floor afterwards.
double learning_rate(const TrainConfig& config, int step);

struct LossBreakdown {
  double l_mask = 0.0;
  double l_mse = 0.0;
  double l_contrastive = 0.0;
  double lambda_reg = 1.0;
  double lambda_cont = 1.0;
  double total = 0.0;
  double accuracy = 0.0;  // masked-token accuracy on the batch
  double lr = 0.0;
};

struct OptimizerState {
  ParamVector m, v;
  int step = 0;
};

/// Per-example randomness of one step, drawn up front so the loss is a
/// deterministic function of the parameters.
struct StepDraws {
  std::vector<MaskTensor> masks;
  std::vector<bool> dropped;  // conditioning replaced by NULL
};
StepDraws draw_step(const Model& model, std::span<const TrainExample> batch, Rng& rng);

/// Full objective l_mask + lambda_reg * l_mse + lambda_cont * l_contrastive
/// for fixed draws. Auxiliary terms apply to seq2seq/hybrid and only to
/// examples whose conditioning was kept; the contrastive term needs at least
/// two such examples. Gradients are accumulated into *grads when given.
LossBreakdown compute_loss(const Model& model, const ParamVector& params,
                           std::span<const TrainExample> batch, const StepDraws& draws,
                           const TrainConfig& config, ParamVector* grads);

/// Draws masks and dropout, computes the loss and applies one AdamW update
/// in place. Throws NumericError (params untouched) when a loss term is not
/// finite.
LossBreakdown train_step(const Model& model, ParamVector& params, OptimizerState& state,
                         std::span<const TrainExample> batch, const TrainConfig& config, Rng& rng);

void adamw_update(ParamVector& params, const ParamVector& grads,
                  OptimizerState& state, const ParamLayout& layout, const TrainConfig& config,
                  double lr);

/// Masked-token accuracy with training-style cosine masks drawn from `seed`,
/// always conditional. Returns nullopt if no position was masked.
std::optional<double> evaluate_accuracy(const Model& model, const ParamVector& params,
                                        std::span<const TrainExample> examples, std::uint64_t seed,
                                        int threads);

}  // namespace maskgrid
