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
#include <numbers>

#include <gtest/gtest.h>

#include "maskgrid/sampler.hpp"
#include "test_support.hpp"

namespace maskgrid {
namespace {

using testing::random_bundle;
using testing::random_codegram;
using testing::tiny_config;

// Logits one-hot (in the exp sense) on a fixed target grid.
class OneHotModel : public LogitsModel {
 public:
  explicit OneHotModel(Codegram target) : target_(std::move(target)) {}
  CodebookSpec spec() const override { return target_.spec(); }
  LogitsGrid logits(std::span<const std::int32_t>, int length, const MaskTensor&,
                    const ConditioningBundle*) const override {
    LogitsGrid g(length, target_.levels(), target_.spec().vocab_size);
    g.values.setConstant(-1e4);
    for (int l = 0; l < length; ++l)
      for (int k = 0; k < target_.levels(); ++k) g.at(l, k, target_.at(l, k)) = 0.0;
    return g;
  }

 private:
  Codegram target_;
};

// Pseudo-random logits that depend on the visible tokens and conditioning.
class HashModel : public LogitsModel {
 public:
  explicit HashModel(CodebookSpec spec) : spec_(spec) {}
  CodebookSpec spec() const override { return spec_; }
  LogitsGrid logits(std::span<const std::int32_t> tokens, int length, const MaskTensor& mask,
                    const ConditioningBundle* bundle) const override {
    ++calls;
    std::uint64_t h = bundle ? 17 : 3;
    for (std::size_t i = 0; i < tokens.size(); ++i) h = h * 1099511628211ULL + (mask.flat(i) ? 7 : tokens[i]);
    Rng rng(h);
    LogitsGrid g(length, spec_.levels, spec_.vocab_size);
    for (Eigen::Index i = 0; i < g.values.size(); ++i) g.values.data()[i] = 2.0 * rng.normal();
    return g;
  }
  mutable int calls = 0;

 private:
  CodebookSpec spec_;
};

TEST(GuidedLogits, Identities) {
  Rng rng(1);
  LogitsGrid c(3, 2, 4), u(3, 2, 4);
  c.values = testing::random_mat(3, 8, rng);
  u.values = testing::random_mat(3, 8, rng);
  EXPECT_TRUE(guided_logits(c, u, 0.0).values == c.values);
  for (double g : {0.5, 2.0, 3.0, 7.25}) EXPECT_TRUE(guided_logits(c, c, g).values == c.values);
  LogitsGrid one(1, 1, 1), half(1, 1, 1);
  one.values(0, 0) = 1.0;
  half.values(0, 0) = 0.5;
  EXPECT_EQ(guided_logits(one, half, 2.0).values(0, 0), 2.0);
  EXPECT_THROW(guided_logits(c, u, -0.1), InvalidArgument);
  EXPECT_THROW(guided_logits(c, LogitsGrid(3, 2, 5), 1.0), ShapeError);
}

TEST(Diversity, Schedule) {
  EXPECT_EQ(diversity_at(8.0, 31, 32), 0.0);
  EXPECT_EQ(diversity_at(8.0, 15, 32), 4.0);
  EXPECT_EQ(diversity_at(0.0, 3, 32), 0.0);
  EXPECT_EQ(diversity_at(8.0, 0, 1), 0.0);
  EXPECT_THROW(diversity_at(8.0, 32, 32), InvalidArgument);
  EXPECT_THROW(diversity_at(8.0, -1, 32), InvalidArgument);
}

TEST(Confidence, NoiseFreeGumbelMeanAndDeterminism) {
  const std::vector<double> lp = {-0.1, -2.0, -0.7};
  Rng rng(2);
  EXPECT_EQ(confidence(lp, 0.0, rng), lp);
  Rng a(5), b(5);
  EXPECT_EQ(confidence(lp, 3.0, a), confidence(lp, 3.0, b));

  Rng g(9);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += g.gumbel();
  EXPECT_NEAR(sum / 100000, 0.5772156649, 0.01);
}

TEST(SampleStep, SingleStepCommitsEverything) {
  const CodebookSpec s{3, 6, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.n_steps = 1;
  const auto r = sample(m, nullptr, 5, c);
  EXPECT_EQ(r.trace.back().masked_count, 0);
  for (auto t : r.codegram.tokens()) {
    EXPECT_GE(t, 0);
    EXPECT_LT(t, 6);
  }
}

TEST(SampleStep, OneHotModelRecoversTargetForAnyStepCount) {
  const CodebookSpec s{4, 16, 2, 1.0};
  Rng rng(3);
  const Codegram target = random_codegram(s, 9, rng);
  OneHotModel m(target);
  for (int steps : {1, 2, 5, 8, 32, 50}) {
    SamplerConfig c;
    c.n_steps = steps;
    c.gamma = 0.0;
    c.delta = 0.0;
    c.seed = steps;
    EXPECT_TRUE(sample(m, nullptr, 9, c).codegram == target) << steps;
  }
}

TEST(SampleStep, EmptyStepLeavesStateUntouched) {
  const CodebookSpec s{1, 5, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.n_steps = 10;
  const auto schedule = build_sample_schedule(2, 10);
  ASSERT_EQ(schedule.kappa(0), 0);
  SamplerState st = initial_state(s, 2, c);
  const SamplerState before = st;
  const int passes = sample_step(st, m, nullptr, c, schedule);
  EXPECT_EQ(passes, 0);
  EXPECT_EQ(m.calls, 0);
  EXPECT_EQ(st.step, 1);
  EXPECT_EQ(st.tokens, before.tokens);
  EXPECT_TRUE(st.mask == before.mask);
  EXPECT_EQ(st.confidences, before.confidences);
  Rng r1 = st.rng, r2 = before.rng;
  EXPECT_EQ(r1.next_u64(), r2.next_u64());
}

TEST(SampleStep, StateMismatchRaises) {
  const CodebookSpec s{2, 5, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.n_steps = 4;
  SamplerState st = initial_state(s, 3, c);
  EXPECT_THROW(sample_step(st, m, nullptr, c, build_sample_schedule(6, 5)), InvalidArgument);
  EXPECT_THROW(sample_step(st, m, nullptr, c, build_sample_schedule(7, 4)), InvalidArgument);
  st.step = 4;
  EXPECT_THROW(sample_step(st, m, nullptr, c, build_sample_schedule(6, 4)), InvalidArgument);
}

TEST(SampleStep, TiesBreakInGridOrder) {
  const CodebookSpec s{2, 4, 2, 1.0};
  OneHotModel m(Codegram::filled(s, 5, 1));  // every confidence is exactly 0
  SamplerConfig c;
  c.n_steps = 4;
  c.delta = 0.0;
  c.gamma = 0.0;
  const auto schedule = build_sample_schedule(10, 4);
  SamplerState st = initial_state(s, 5, c);
  sample_step(st, m, nullptr, c, schedule);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(st.mask.flat(i), i < schedule.masked_counts[1]) << i;
}

TEST(Sample, ContractOverRandomConfigs) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const CodebookSpec s{1 + static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(10)), 2, 1.0};
    const int length = 1 + static_cast<int>(rng.below(12));
    HashModel m(s);
    SamplerConfig c;
    c.n_steps = 1 + static_cast<int>(rng.below(40));
    c.gamma = rng.uniform(0.0, 4.0);
    c.delta = rng.uniform(0.0, 10.0);
    c.temperature = rng.uniform(0.5, 2.0);
    c.seed = trial;
    const auto schedule = build_sample_schedule(length * s.levels, c.n_steps);
    SamplerState prev = initial_state(s, length, c);
    int n = 0;
    const auto r = sample(m, nullptr, length, c, [&](const SamplerState& st) {
      ++n;
      ASSERT_EQ(st.mask.count_masked(), schedule.masked_counts[n]);
      for (std::size_t i = 0; i < st.tokens.size(); ++i) {
        if (!prev.mask.flat(i)) {
          ASSERT_FALSE(st.mask.flat(i));
          ASSERT_EQ(st.tokens[i], prev.tokens[i]);
        }
        ASSERT_EQ(st.mask.flat(i), st.tokens[i] == s.mask_token());
      }
      prev = st;
    });
    ASSERT_EQ(n, c.n_steps);
    ASSERT_EQ(prev.mask.count_masked(), 0);
  }
}

TEST(Sample, ForwardPassCount) {
  const CodebookSpec s{4, 6, 2, 1.0};
  for (double gamma : {0.0, 2.0}) {
    HashModel m(s);
    SamplerConfig c;
    c.n_steps = 12;
    c.gamma = gamma;
    const auto r = sample(m, nullptr, 32, c);
    EXPECT_EQ(r.forward_passes, 12 * (gamma > 0 ? 2 : 1));
    EXPECT_EQ(m.calls, r.forward_passes);
  }
}

TEST(Sample, ForwardPassCountSkipsEmptySteps) {
  const CodebookSpec s{3, 6, 2, 1.0};
  const auto schedule = build_sample_schedule(24, 12);
  int busy = 0;
  for (int n = 0; n < 12; ++n) busy += schedule.kappa(n) > 0;
  ASSERT_LT(busy, 12);
  HashModel m(s);
  SamplerConfig c;
  c.n_steps = 12;
  EXPECT_EQ(sample(m, nullptr, 8, c).forward_passes, 2 * busy);
}

TEST(Sample, GammaZeroMatchesExplicitTwoPass) {
  const ModelConfig cfg = tiny_config(Structure::hybrid);
  const Model model(cfg);
  const auto params = model.init_params(5);
  TransformerLogits lm(model, params);
  Rng rng(6);
  for (int run = 0; run < 20; ++run) {
    const ConditioningBundle b = random_bundle(cfg, rng);
    SamplerConfig c;
    c.n_steps = 6;
    c.gamma = 0.0;
    c.seed = run;
    const auto one = sample(lm, &b, 6, c);
    c.force_two_pass = true;
    const auto two = sample(lm, &b, 6, c);
    ASSERT_TRUE(one.codegram == two.codegram);
    ASSERT_EQ(two.forward_passes, 2 * one.forward_passes);
  }
}

TEST(Sample, SeedDeterminism) {
  const CodebookSpec s{3, 6, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.seed = 42;
  EXPECT_TRUE(sample(m, nullptr, 7, c).codegram == sample(m, nullptr, 7, c).codegram);
}

TEST(Sample, ResampleCommittedKeepsCounts) {
  const CodebookSpec s{2, 6, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.n_steps = 8;
  c.resample_committed = true;
  const auto schedule = build_sample_schedule(12, 8);
  int n = 0;
  sample(m, nullptr, 6, c, [&](const SamplerState& st) { ASSERT_EQ(st.mask.count_masked(), schedule.masked_counts[++n]); });
}

TEST(Beams, IndependentOfThreadCount) {
  const CodebookSpec s{3, 6, 2, 1.0};
  HashModel m(s);
  SamplerConfig c;
  c.seed = 9;
  const auto a = sample_beams(m, nullptr, 6, c, 5, 1);
  const auto b = sample_beams(m, nullptr, 6, c, 5, 4);
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(a[i].codegram == b[i].codegram);
  SamplerConfig c3 = c;
  c3.seed = derive_seed(9, "beam", 3);
  EXPECT_TRUE(sample(m, nullptr, 6, c3).codegram == a[3].codegram);
}

TEST(Trace, CsvHeader) {
  const std::vector<StepTrace> t = {{0, 3, -0.5}};
  EXPECT_EQ(trace_to_csv(t), "step,masked_count,mean_confidence\n0,3,-0.5\n");
}

}  // namespace
}  // namespace maskgrid
