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

#include <cmath>

#include <gtest/gtest.h>

#include "maskgrid/losses.hpp"
#include "maskgrid/model.hpp"
#include "test_support.hpp"

namespace maskgrid {
namespace {

using testing::random_bundle;
using testing::random_codegram;
using testing::random_example;
using testing::random_mask;
using testing::tiny_config;

double max_rel_grad_error(Structure s, bool with_dropped) {
  const ModelConfig cfg = tiny_config(s);
  const Model model(cfg);
  ParamVector params = model.init_params(11);
  Rng rng(5);
  // Push every parameter away from its structured init so no term is
  // degenerate (zero biases, unit gates).
  for (double& p : params) p += 0.05 * rng.normal();

  std::vector<TrainExample> batch;
  StepDraws draws;
  for (int i = 0; i < 3; ++i) {
    batch.push_back(random_example(cfg, 4 + i % 2, rng));
    draws.masks.push_back(random_mask(batch.back().codegram.length(), cfg.spec.levels, rng));
    draws.dropped.push_back(with_dropped && i == 1);
  }
  TrainConfig tc;
  tc.lambda_reg = 0.7;
  tc.lambda_cont = 0.3;

  ParamVector grads(params.size(), 0.0);
  compute_loss(model, params, batch, draws, tc, &grads);

  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = compute_loss(model, params, batch, draws, tc, nullptr).total;
    params[i] = saved - h;
    const double down = compute_loss(model, params, batch, draws, tc, nullptr).total;
    params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(grads[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grads[i]) / denom);
  }
  return worst;
}

TEST(ModelGradient, AdaLnMatchesFiniteDifferences) {
  EXPECT_LT(max_rel_grad_error(Structure::adaln, true), 1e-4);
}

TEST(ModelGradient, Seq2SeqMatchesFiniteDifferences) {
  EXPECT_LT(max_rel_grad_error(Structure::seq2seq, true), 1e-4);
}

TEST(ModelGradient, HybridMatchesFiniteDifferences) {
  EXPECT_LT(max_rel_grad_error(Structure::hybrid, true), 1e-4);
}

TEST(Model, TinyConfigsStayUnderTenThousandParameters) {
  for (auto s : {Structure::adaln, Structure::seq2seq, Structure::hybrid})
    EXPECT_LT(Model(tiny_config(s)).layout().size(), 10000u) << structure_name(s);
}

TEST(Model, LogitsShapeAndDeterminism) {
  const ModelConfig cfg = tiny_config(Structure::seq2seq);
  const Model model(cfg);
  const auto params = model.init_params(3);
  Rng rng(1);
  const Codegram cg = random_codegram(cfg.spec, 5, rng);
  const ConditioningBundle b = random_bundle(cfg, rng);
  const MaskTensor m = random_mask(5, cfg.spec.levels, rng);
  const auto a = model.forward(params, cg, m, &b);
  const auto c = model.forward(params, cg, m, &b);
  EXPECT_EQ(a.logits.values.rows(), 5);
  EXPECT_EQ(a.logits.values.cols(), cfg.spec.levels * cfg.spec.vocab_size);
  EXPECT_TRUE(a.logits.values == c.logits.values);
  ASSERT_TRUE(a.encoder.has_value());
  EXPECT_EQ(a.encoder->sequence.rows(), 4);  // clip-like frames
}

TEST(Model, MaskedTokensDoNotLeakIntoLogits) {
  const ModelConfig cfg = tiny_config(Structure::adaln);
  const Model model(cfg);
  const auto params = model.init_params(3);
  Rng rng(2);
  const Codegram cg = random_codegram(cfg.spec, 5, rng);
  std::vector<std::int32_t> other(cg.tokens().begin(), cg.tokens().end());
  const MaskTensor m = random_mask(5, cfg.spec.levels, rng);
  for (std::size_t i = 0; i < other.size(); ++i)
    if (m.flat(i)) other[i] = (other[i] + 1) % cfg.spec.vocab_size;
  const ConditioningBundle b = random_bundle(cfg, rng);
  const auto a = model.forward(params, cg, m, &b);
  const auto c = model.forward(params, Codegram(cfg.spec, 5, other), m, &b);
  EXPECT_TRUE(a.logits.values == c.logits.values);
}

TEST(Model, ConditioningLengthIsFree) {
  const ModelConfig cfg = tiny_config(Structure::hybrid);
  const Model model(cfg);
  const auto params = model.init_params(3);
  Rng rng(4);
  const Codegram cg = random_codegram(cfg.spec, 6, rng);
  const ConditioningBundle b = random_bundle(cfg, rng, 2);
  const auto out = model.forward(params, cg, MaskTensor(6, cfg.spec.levels, true), &b);
  EXPECT_EQ(out.logits.values.rows(), 6);
}

TEST(Model, BackwardWithoutCacheThrows) {
  const Model model(tiny_config(Structure::adaln));
  const auto params = model.init_params(3);
  ParamVector g(params.size());
  EXPECT_THROW(model.backward(params, ForwardCache{}, Mat(), nullptr, nullptr, g), Error);
}

TEST(Model, NonFiniteParametersRaiseNumericError) {
  const ModelConfig cfg = tiny_config(Structure::adaln);
  const Model model(cfg);
  auto params = model.init_params(3);
  for (auto& p : params) p = std::nan("");
  Rng rng(2);
  const Codegram cg = random_codegram(cfg.spec, 5, rng);
  const ConditioningBundle b = random_bundle(cfg, rng);
  EXPECT_THROW(model.forward(params, cg, MaskTensor(5, 2, true), &b), NumericError);
}

TEST(Model, FullDropoutGivesZeroConditioningGradients) {
  for (auto s : {Structure::adaln, Structure::seq2seq, Structure::hybrid}) {
    const ModelConfig cfg = tiny_config(s);
    const Model model(cfg);
    const auto params = model.init_params(7);
    Rng rng(9);
    std::vector<TrainExample> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_example(cfg, 5, rng));
    Model dropping([&] {
      ModelConfig c = cfg;
      c.cond_dropout_prob = 1.0;
      return c;
    }());
    Rng draw_rng(1);
    const StepDraws draws = draw_step(dropping, batch, draw_rng);
    ParamVector g(params.size(), 0.0);
    compute_loss(dropping, params, batch, draws, TrainConfig{}, &g);
    int checked = 0;
    for (std::size_t id = 0; id < model.layout().entries().size(); ++id) {
      if (!model.is_conditioning_param(static_cast<int>(id))) continue;
      const auto& e = model.layout().entry(static_cast<int>(id));
      for (std::size_t j = e.offset; j < e.offset + e.size(); ++j) {
        EXPECT_EQ(g[j], 0.0) << e.name;
        ++checked;
      }
    }
    EXPECT_GT(checked, 0) << structure_name(s);
  }
}

}  // namespace
}  // namespace maskgrid
