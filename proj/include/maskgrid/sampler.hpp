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
#include <span>
#include <string>
#include <vector>

#include "maskgrid/codegram.hpp"
#include "maskgrid/conditioning.hpp"
#include "maskgrid/model.hpp"
#include "maskgrid/rng.hpp"
#include "maskgrid/scheduler.hpp"

namespace maskgrid {

struct SamplerConfig {
  int n_steps = 32;
  double gamma = 3.0;
  double delta = 8.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  // MaskGIT-style variant: every position is redrawn each step and may be
  // re-masked. Off by default; committed tokens are frozen otherwise.
  bool resample_committed = false;
  // Run the unconditional pass even when gamma == 0.
  bool force_two_pass = false;

  void validate() const;
};

/// Anything that maps a partially masked grid to logits. bundle == nullptr
/// asks for the unconditional mode.
class LogitsModel {
 public:
  virtual ~LogitsModel() = default;
  virtual CodebookSpec spec() const = 0;
  virtual LogitsGrid logits(std::span<const std::int32_t> tokens, int length, const MaskTensor& mask,
                            const ConditioningBundle* bundle) const = 0;
};

class TransformerLogits : public LogitsModel {
 public:
  TransformerLogits(const Model& model, const ParamVector& params)
      : model_(model), params_(params) {}
  CodebookSpec spec() const override { return model_.config().spec; }
  LogitsGrid logits(std::span<const std::int32_t> tokens, int length, const MaskTensor& mask,
                    const ConditioningBundle* bundle) const override {
    return model_.forward(params_, tokens, length, mask, bundle).logits;
  }

 private:
  const Model& model_;
  const ParamVector& params_;
};

struct SamplerState {
  int step = 0;
  int length = 0;
  CodebookSpec spec;
  std::vector<std::int32_t> tokens;  // mask token where masked
  MaskTensor mask;
  std::vector<double> confidences;  // valid at positions sampled in the last step
  Rng rng;
};

struct StepTrace {
  int step = 0;
  int masked_count = 0;  // after the step
  double mean_confidence = 0.0;
};

/// (1+gamma)*cond - gamma*uncond, elementwise.
LogitsGrid guided_logits(const LogitsGrid& cond, const LogitsGrid& uncond, double gamma);

/// delta * (1 - (n+1)/n_steps) for zero-based n, clamped at 0.
double diversity_at(double delta, int n, int n_steps);

/// log_probs[i] + delta_n * Gumbel(0,1); no draws are made when delta_n == 0.
std::vector<double> confidence(std::span<const double> log_probs, double delta_n, Rng& rng);

SamplerState initial_state(const CodebookSpec& spec, int length, const SamplerConfig& config);

/// One decoding iteration. Returns the number of model evaluations made;
/// steps that commit nothing (kappa == 0) are skipped without a model call.
int sample_step(SamplerState& state, const LogitsModel& model, const ConditioningBundle* bundle,
                const SamplerConfig& config, const SampleSchedule& schedule,
                StepTrace* trace = nullptr);

struct SampleResult {
  Codegram codegram;
  std::vector<StepTrace> trace;
  int forward_passes = 0;
};

using StepObserver = std::function<void(const SamplerState&)>;

SampleResult sample(const LogitsModel& model, const ConditioningBundle* bundle, int length,
                    const SamplerConfig& config, const StepObserver& observer = {});

/// Independent runs with seeds derived from (config.seed, beam index),
/// executed in parallel; output order follows the beam index.
std::vector<SampleResult> sample_beams(const LogitsModel& model, const ConditioningBundle* bundle,
                                       int length, const SamplerConfig& config, int beams,
                                       int threads);

std::string trace_to_csv(const std::vector<StepTrace>& trace);

}  // namespace maskgrid
