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

#include "maskgrid/trainer.hpp"

#include <cmath>

#include "maskgrid/losses.hpp"
#include "maskgrid/parallel.hpp"
#include "maskgrid/scheduler.hpp"

namespace maskgrid {

double learning_rate(const TrainConfig& c, int step) {
  if (step < c.warmup_steps) return c.peak_lr * static_cast<double>(step) / c.warmup_steps;
  if (step >= c.total_steps || c.total_steps <= c.warmup_steps) return c.floor_lr;
  const double progress =
      static_cast<double>(step - c.warmup_steps) / static_cast<double>(c.total_steps - c.warmup_steps);
  return c.floor_lr + (c.peak_lr - c.floor_lr) * std::pow(1.0 - progress, c.decay_power);
}

StepDraws draw_step(const Model& model, std::span<const TrainExample> batch, Rng& rng) {
  StepDraws d;
  for (const auto& ex : batch) {
    d.masks.push_back(draw_train_mask(ex.codegram.length(), ex.codegram.levels(), rng).mask);
    d.dropped.push_back(rng.bernoulli(model.config().cond_dropout_prob));
  }
  return d;
}

namespace {

struct ExampleState {
  ForwardCache cache;
  ForwardOutput out;
  Mat projected_target;
  SeqMseResult mse;
  double nll = 0.0;
  int masked = 0;
  int hits = 0;
};

}  // namespace

LossBreakdown compute_loss(const Model& model, const ParamVector& params,
                           std::span<const TrainExample> batch, const StepDraws& draws,
                           const TrainConfig& config, ParamVector* grads) {
  const std::size_t b = batch.size();
  require_arg(b >= 1, "empty batch");
  require_shape(draws.masks.size() == b && draws.dropped.size() == b, "draws do not match batch");
  const bool aux = model.config().has_encoder();
  const bool want = grads != nullptr;

  std::vector<ExampleState> st(b);
  parallel_for(b, config.threads, [&](std::size_t i) {
    const auto& ex = batch[i];
    st[i].out = model.forward(params, ex.codegram, draws.masks[i], draws.dropped[i] ? nullptr : &ex.bundle,
                              want ? &st[i].cache : nullptr);
    st[i].nll = masked_nll_sum(st[i].out.logits, ex.codegram, draws.masks[i], st[i].masked);
    masked_token_hits(st[i].out.logits, ex.codegram, draws.masks[i], st[i].hits, st[i].masked);
    if (aux && !draws.dropped[i]) {
      require_arg(ex.aux_targets.rows() >= 1, "seq2seq/hybrid training needs aux targets");
      st[i].projected_target = model.project_aux(params, ex.aux_targets);
      st[i].mse = seq_mse(st[i].out.encoder->sequence, st[i].projected_target, want);
    }
  });

  LossBreakdown lb;
  lb.lambda_reg = config.lambda_reg;
  lb.lambda_cont = config.lambda_cont;
  int total_masked = 0, total_hits = 0;
  double total_nll = 0.0;
  for (const auto& s : st) {
    total_masked += s.masked;
    total_hits += s.hits;
    total_nll += s.nll;
  }
  lb.l_mask = total_masked ? total_nll / total_masked : 0.0;
  lb.accuracy = total_masked ? static_cast<double>(total_hits) / total_masked : 0.0;

  std::vector<std::size_t> kept;
  if (aux) {
    for (std::size_t i = 0; i < b; ++i)
      if (!draws.dropped[i]) kept.push_back(i);
  }
  for (std::size_t i : kept) lb.l_mse += st[i].mse.value;
  if (!kept.empty()) lb.l_mse /= static_cast<double>(kept.size());

  ClipContrastiveResult cont;
  const bool use_cont = kept.size() >= 2;
  if (use_cont) {
    const Eigen::Index h = model.config().hidden;
    Mat cls(kept.size(), h), tmean(kept.size(), h);
    for (std::size_t j = 0; j < kept.size(); ++j) {
      cls.row(j) = st[kept[j]].out.encoder->cls;
      tmean.row(j) = st[kept[j]].projected_target.colwise().mean();
    }
    cont = clip_contrastive_scaled(cls, tmean, model.contrastive_scale(params), want);
    lb.l_contrastive = cont.value;
  }
  lb.total = lb.l_mask + lb.lambda_reg * lb.l_mse + lb.lambda_cont * lb.l_contrastive;

  if (!std::isfinite(lb.l_mask)) throw NumericError("non-finite loss component: l_mask");
  if (!std::isfinite(lb.l_mse)) throw NumericError("non-finite loss component: l_mse");
  if (!std::isfinite(lb.l_contrastive)) throw NumericError("non-finite loss component: l_contrastive");
  if (!want) return lb;

  std::vector<int> kept_slot(b, -1);
  for (std::size_t j = 0; j < kept.size(); ++j) kept_slot[kept[j]] = static_cast<int>(j);
  const double mask_scale = total_masked ? 1.0 / total_masked : 0.0;
  const double mse_scale = kept.empty() ? 0.0 : config.lambda_reg / static_cast<double>(kept.size());

  std::vector<ParamVector> per_example(b);
  parallel_for(b, config.threads, [&](std::size_t i) {
    const auto& ex = batch[i];
    auto& g = per_example[i];
    g.assign(model.layout().size(), 0.0);
    int count = 0;
    Mat dlogits;
    masked_nll_sum(st[i].out.logits, ex.codegram, draws.masks[i], count, &dlogits, mask_scale);
    Mat d_seq;
    RowVec d_cls;
    const Mat* d_seq_ptr = nullptr;
    const RowVec* d_cls_ptr = nullptr;
    if (kept_slot[i] >= 0) {
      d_seq = st[i].mse.d_seq * mse_scale;
      d_seq_ptr = &d_seq;
      Mat d_target = st[i].mse.d_target * mse_scale;
      if (use_cont) {
        const int j = kept_slot[i];
        d_cls = cont.d_a.row(j) * config.lambda_cont;
        d_cls_ptr = &d_cls;
        const RowVec d_mean = cont.d_b.row(j) * config.lambda_cont;
        d_target.rowwise() += d_mean / static_cast<double>(d_target.rows());
      }
      model.project_aux_backward(params, ex.aux_targets, d_target, g);
    }
    model.backward(params, st[i].cache, dlogits, d_seq_ptr, d_cls_ptr, g);
  });
  // Fixed-order reduction keeps results independent of the thread count.
  auto& out = *grads;
  for (const auto& g : per_example)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
  if (use_cont) model.contrastive_scale_backward(params, cont.d_scale * config.lambda_cont, out);
  return lb;
}

void adamw_update(ParamVector& params, const ParamVector& grads, OptimizerState& s,
                  const ParamLayout& layout, const TrainConfig& c, double lr) {
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  const int t = s.step + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& e : layout.entries()) {
    const double wd = e.decay ? c.weight_decay : 0.0;
    for (std::size_t i = e.offset; i < e.offset + e.size(); ++i) {
      s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * grads[i];
      s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + c.adam_eps) + wd * params[i]);
    }
  }
}

LossBreakdown train_step(const Model& model, ParamVector& params, OptimizerState& state,
                         std::span<const TrainExample> batch, const TrainConfig& config, Rng& rng) {
  const StepDraws draws = draw_step(model, batch, rng);
  ParamVector grads(params.size(), 0.0);
  LossBreakdown lb = compute_loss(model, params, batch, draws, config, &grads);
  if (config.grad_clip > 0.0) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config.grad_clip) {
      const double f = config.grad_clip / norm;
      for (double& g : grads) g *= f;
    }
  }
  lb.lr = learning_rate(config, state.step);
  adamw_update(params, grads, state, model.layout(), config, lb.lr);
  ++state.step;
  return lb;
}

std::optional<double> evaluate_accuracy(const Model& model, const ParamVector& params,
                                        std::span<const TrainExample> examples, std::uint64_t seed,
                                        int threads) {
  std::vector<MaskTensor> masks;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Rng rng(derive_seed(seed, "eval.mask", i));
    masks.push_back(draw_train_mask(examples[i].codegram.length(), examples[i].codegram.levels(), rng).mask);
  }
  std::vector<int> hits(examples.size()), counts(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    const auto out = model.forward(params, examples[i].codegram, masks[i], &examples[i].bundle);
    masked_token_hits(out.logits, examples[i].codegram, masks[i], hits[i], counts[i]);
  });
  long h = 0, c = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    h += hits[i];
    c += counts[i];
  }
  if (c == 0) return std::nullopt;
  return static_cast<double>(h) / static_cast<double>(c);
}

}  // namespace maskgrid
