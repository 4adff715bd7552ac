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

#include "maskgrid/conditioning.hpp"
#include "maskgrid/scheduler.hpp"

namespace maskgrid {
namespace {

TEST(TrainMask, EndpointsOfU) {
  Rng rng(1);
  const auto full = draw_train_mask_at(10, 9, 0.0, rng);
  EXPECT_EQ(full.p, 1.0);
  EXPECT_EQ(full.mask.count_masked(), 90);
  const auto none = draw_train_mask_at(10, 9, std::numbers::pi / 2, rng);
  EXPECT_EQ(none.p, 0.0);
  EXPECT_EQ(none.mask.count_masked(), 0);
}

TEST(TrainMask, MeanMaskedFractionIsTwoOverPi) {
  Rng rng(2024);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto d = draw_train_mask(10, 9, rng);
    ASSERT_GE(d.p, 0.0);
    ASSERT_LE(d.p, 1.0);
    sum += d.mask.count_masked() / 90.0;
  }
  EXPECT_NEAR(sum / draws, 2.0 / std::numbers::pi, 0.01);
}

// Upper 1% point of chi-square via Wilson-Hilferty.
double chi2_critical_01(int dof) {
  const double z = 2.3263478740408408;
  const double k = dof;
  return k * std::pow(1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k)), 3);
}

TEST(TrainMask, CountIsBinomialGivenP) {
  const int n = 90, samples = 10000;
  const double u = 0.9;
  const double p = std::cos(u);
  Rng rng(77);
  std::vector<int> hist(n + 1, 0);
  for (int i = 0; i < samples; ++i) ++hist[draw_train_mask_at(10, 9, u, rng).mask.count_masked()];

  std::vector<double> pmf(n + 1);
  for (int c = 0; c <= n; ++c)
    pmf[c] = std::exp(std::lgamma(n + 1.0) - std::lgamma(c + 1.0) - std::lgamma(n - c + 1.0) + c * std::log(p) +
                      (n - c) * std::log1p(-p));
  // Pool tails so every bin expects at least 5.
  double chi2 = 0.0, exp_acc = 0.0;
  int obs_acc = 0, bins = 0;
  for (int c = 0; c <= n; ++c) {
    exp_acc += pmf[c] * samples;
    obs_acc += hist[c];
    if (exp_acc >= 5.0 && (c == n || [&] {
          double rest = 0.0;
          for (int j = c + 1; j <= n; ++j) rest += pmf[j] * samples;
          return rest >= 5.0;
        }())) {
      chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
      ++bins;
      exp_acc = 0.0;
      obs_acc = 0;
    }
  }
  if (exp_acc > 0.0) chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc, ++bins;
  EXPECT_LT(chi2, chi2_critical_01(bins - 1)) << "bins=" << bins;
}

TEST(SampleSchedule, SmallCases) {
  const auto zero = build_sample_schedule(0, 4);
  for (int c : zero.masked_counts) EXPECT_EQ(c, 0);
  const auto one = build_sample_schedule(10, 1);
  EXPECT_EQ(one.masked_counts, (std::vector<int>{10, 0}));
  EXPECT_EQ(one.kappa(0), 10);
  EXPECT_THROW(build_sample_schedule(10, 0), InvalidArgument);
  EXPECT_THROW(build_sample_schedule(-1, 3), InvalidArgument);
}

TEST(SampleSchedule, MatchesDirectFormula) {
  const auto s = build_sample_schedule(90, 32);
  ASSERT_EQ(s.masked_counts.size(), 33u);
  for (int n = 0; n < 32; ++n)
    EXPECT_EQ(s.masked_counts[n], static_cast<int>(std::ceil(90.0 * std::cos(std::numbers::pi * n / 64.0)))) << n;
  EXPECT_EQ(s.masked_counts[32], 0);
}

TEST(SampleSchedule, KappasSumToTotalAndCountsMonotone) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int total = static_cast<int>(rng.below(2000));
    const int steps = 1 + static_cast<int>(rng.below(64));
    const auto s = build_sample_schedule(total, steps);
    int sum = 0;
    for (int n = 0; n < steps; ++n) {
      ASSERT_GE(s.kappa(n), 0);
      sum += s.kappa(n);
    }
    ASSERT_EQ(sum, total);
    ASSERT_EQ(s.masked_counts.front(), total);
    ASSERT_EQ(s.masked_counts.back(), 0);
  }
}

TEST(SampleSchedule, CsvDump) {
  EXPECT_EQ(schedule_to_csv(build_sample_schedule(10, 1)), "step,masked_count,kappa\n0,10,10\n");
}

TEST(Resample, IdentityAndIntegerRatios) {
  EXPECT_EQ(resample_indices(5, 5), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(resample_indices(2, 6), (std::vector<int>{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(resample_indices(3, 9), (std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2}));
  EXPECT_EQ(resample_indices(6, 2), (std::vector<int>{1, 4}));
  EXPECT_EQ(resample_indices(1, 3), (std::vector<int>{0, 0, 0}));
}

TEST(Resample, IndicesStayInRangeAndMonotone) {
  for (int in = 1; in < 40; ++in) {
    for (int out = 1; out < 40; ++out) {
      const auto idx = resample_indices(in, out);
      ASSERT_EQ(static_cast<int>(idx.size()), out);
      for (int j = 0; j < out; ++j) {
        ASSERT_GE(idx[j], 0);
        ASSERT_LT(idx[j], in);
        if (j) ASSERT_LE(idx[j - 1], idx[j]);
      }
    }
  }
}

TEST(Conditioning, PathsAndMissingRoles) {
  ConditioningBundle b;
  b.streams.push_back({"clip", StreamRole::frame_semantic, Mat::Ones(4, 3)});
  b.streams.push_back({"s3d", StreamRole::alignment_sensitive, Mat::Constant(6, 2, 2.0)});
  const Mat a = build_conditioning(b, ConditioningPath::adaln, 12);
  EXPECT_EQ(a.rows(), 12);
  EXPECT_EQ(a.cols(), 5);
  const Mat s = build_conditioning(b, ConditioningPath::seq2seq, 12);
  EXPECT_EQ(s.rows(), 4);
  const Mat h = build_conditioning(b, ConditioningPath::hybrid_adaln, 12);
  EXPECT_EQ(h.rows(), 12);
  EXPECT_EQ(h.cols(), 2);

  ConditioningBundle only_s3d;
  only_s3d.streams.push_back(b.streams[1]);
  EXPECT_THROW(build_conditioning(only_s3d, ConditioningPath::seq2seq, 12), InvalidArgument);
  ConditioningBundle only_clip;
  only_clip.streams.push_back(b.streams[0]);
  EXPECT_THROW(build_conditioning(only_clip, ConditioningPath::hybrid_adaln, 12), InvalidArgument);
}

TEST(Conditioning, ScatterIsAdjointOfAssemble) {
  Rng rng(3);
  std::vector<Mat> streams = {Mat::Random(4, 3), Mat::Random(7, 2)};
  const std::vector<StreamShape> shapes = {{StreamRole::frame_semantic, 4, 3}, {StreamRole::alignment_sensitive, 7, 2}};
  const auto layout = conditioning_layout(shapes, ConditioningPath::adaln, 10);
  const Mat y = assemble_conditioning({&streams[0], &streams[1]}, layout);
  const Mat w = Mat::Random(y.rows(), y.cols());
  std::vector<Mat> d = {Mat::Zero(4, 3), Mat::Zero(7, 2)};
  scatter_conditioning(w, layout, d);
  const double lhs = (w.array() * y.array()).sum();
  const double rhs = (d[0].array() * streams[0].array()).sum() + (d[1].array() * streams[1].array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

}  // namespace
}  // namespace maskgrid
