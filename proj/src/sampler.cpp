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

#include "maskgrid/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "maskgrid/parallel.hpp"

namespace maskgrid {

void SamplerConfig::validate() const {
  require_arg(n_steps >= 1, "n_steps must be >= 1");
  require_arg(gamma >= 0.0, "gamma must be >= 0");
  require_arg(delta >= 0.0, "delta must be >= 0");
  require_arg(temperature > 0.0, "temperature must be > 0");
}

LogitsGrid guided_logits(const LogitsGrid& cond, const LogitsGrid& uncond, double gamma) {
  require_arg(gamma >= 0.0, "guidance scale must be >= 0");
  require_shape(cond.length == uncond.length && cond.levels == uncond.levels &&
                    cond.vocab == uncond.vocab,
                "conditional/unconditional logits shape mismatch");
  // Same as (1+gamma)*c - gamma*u, but exact when gamma == 0 or c == u.
  LogitsGrid out = cond;
  out.values = cond.values + gamma * (cond.values - uncond.values);
  return out;
}

double diversity_at(double delta, int n, int n_steps) {
  require_arg(n_steps >= 1 && n >= 0 && n < n_steps, "step index out of range");
  return std::max(0.0, delta * (1.0 - static_cast<double>(n + 1) / n_steps));
}

std::vector<double> confidence(std::span<const double> log_probs, double delta_n, Rng& rng) {
  std::vector<double> out(log_probs.begin(), log_probs.end());
  if (delta_n == 0.0) return out;
  for (double& c : out) c += delta_n * rng.gumbel();
  return out;
}

SamplerState initial_state(const CodebookSpec& spec, int length, const SamplerConfig& config) {
  require_arg(length >= 1, "sample length must be >= 1");
  SamplerState s;
  s.length = length;
  s.spec = spec;
  s.tokens.assign(static_cast<std::size_t>(length) * spec.levels, spec.mask_token());
  s.mask = MaskTensor(length, spec.levels, true);
  s.confidences.assign(s.tokens.size(), 0.0);
  s.rng = Rng(config.seed);
  return s;
}

namespace {

// Inverse-CDF draw from softmax(row / temperature); returns (token, log p).
std::pair<int, double> draw_token(const Eigen::Ref<const RowVec>& row, double temperature, Rng& rng) {
  const RowVec z = row / temperature;
  const double mx = z.maxCoeff();
  const RowVec e = (z.array() - mx).exp().matrix();
  const double sum = e.sum();
  const double u = rng.uniform() * sum;
  double cum = 0.0;
  int pick = -1;
  for (Eigen::Index d = 0; d < e.size(); ++d) {
    if (e[d] <= 0.0) continue;
    cum += e[d];
    pick = static_cast<int>(d);
    if (cum > u) break;
  }
  return {pick, z[pick] - mx - std::log(sum)};
}

}  // namespace

int sample_step(SamplerState& state, const LogitsModel& model, const ConditioningBundle* bundle,
                const SamplerConfig& config, const SampleSchedule& schedule, StepTrace* trace) {
  config.validate();
  const int n = state.step;
  require_arg(schedule.steps == config.n_steps, "schedule does not match n_steps");
  require_arg(schedule.total_positions == static_cast<int>(state.tokens.size()),
              "schedule does not match the grid size");
  require_arg(n >= 0 && n < schedule.steps, "sampler state is past the final step");
  require_arg(state.mask.count_masked() == schedule.masked_counts[n],
              "sampler state does not match the schedule");

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < state.tokens.size(); ++i)
    if (config.resample_committed || state.mask.flat(i)) candidates.push_back(i);
  // A step that commits nothing leaves the state (rng included) untouched.
  if (candidates.empty() || (!config.resample_committed && schedule.kappa(n) == 0)) {
    ++state.step;
    if (trace) *trace = {n, schedule.masked_counts[n + 1], 0.0};
    return 0;
  }

  int passes = 1;
  LogitsGrid guided = model.logits(state.tokens, state.length, state.mask, bundle);
  if (config.gamma > 0.0 || config.force_two_pass) {
    const LogitsGrid uncond = model.logits(state.tokens, state.length, state.mask, nullptr);
    guided = guided_logits(guided, uncond, config.gamma);
    ++passes;
  }

  const int levels = state.spec.levels;
  const double delta_n = diversity_at(config.delta, n, config.n_steps);
  std::vector<int> drawn(candidates.size());
  std::vector<double> log_probs(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const int l = static_cast<int>(candidates[c] / levels);
    const int k = static_cast<int>(candidates[c] % levels);
    std::tie(drawn[c], log_probs[c]) = draw_token(guided.row(l, k), config.temperature, state.rng);
  }
  const std::vector<double> conf = confidence(log_probs, delta_n, state.rng);

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });
  const int remask = schedule.masked_counts[n + 1];
  require_arg(remask <= static_cast<int>(candidates.size()), "schedule re-masks more than sampled");

  double conf_sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t c = order[r];
    const std::size_t pos = candidates[c];
    state.confidences[pos] = conf[c];
    conf_sum += conf[c];
    if (static_cast<int>(r) < remask) {
      state.tokens[pos] = state.spec.mask_token();
      state.mask.set_flat(pos, true);
    } else {
      state.tokens[pos] = drawn[c];
      state.mask.set_flat(pos, false);
    }
  }
  ++state.step;
  if (trace) *trace = {n, remask, conf_sum / static_cast<double>(candidates.size())};
  return passes;
}

SampleResult sample(const LogitsModel& model, const ConditioningBundle* bundle, int length,
                    const SamplerConfig& config, const StepObserver& observer) {
  config.validate();
  const CodebookSpec spec = model.spec();
  SamplerState state = initial_state(spec, length, config);
  const SampleSchedule schedule = build_sample_schedule(static_cast<int>(state.tokens.size()), config.n_steps);
  SampleResult result;
  for (int n = 0; n < config.n_steps; ++n) {
    StepTrace t;
    result.forward_passes += sample_step(state, model, bundle, config, schedule, &t);
    result.trace.push_back(t);
    if (observer) observer(state);
  }
  result.codegram = Codegram(spec, length, state.tokens);
  return result;
}

std::vector<SampleResult> sample_beams(const LogitsModel& model, const ConditioningBundle* bundle,
                                       int length, const SamplerConfig& config, int beams,
                                       int threads) {
  require_arg(beams >= 1, "beam count must be >= 1");
  std::vector<SampleResult> out(beams);
  parallel_for(static_cast<std::size_t>(beams), threads, [&](std::size_t b) {
    SamplerConfig c = config;
    c.seed = derive_seed(config.seed, "beam", b);
    out[b] = sample(model, bundle, length, c);
  });
  return out;
}

std::string trace_to_csv(const std::vector<StepTrace>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,masked_count,mean_confidence\n";
  for (const auto& t : trace) os << t.step << ',' << t.masked_count << ',' << t.mean_confidence << '\n';
  return os.str();
}

}  // namespace maskgrid
