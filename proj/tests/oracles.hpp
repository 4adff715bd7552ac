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

// Straight-line reference implementations used as test oracles. They share
// no code with the library beyond plain containers.

#include <cmath>
#include <vector>

#include "maskgrid/common.hpp"

namespace maskgrid::oracle {

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// logits[l][k][d], tokens[l][k], mask[l][k]
inline double masked_ce(const std::vector<std::vector<std::vector<double>>>& logits,
                        const std::vector<std::vector<int>>& tokens,
                        const std::vector<std::vector<bool>>& mask) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t l = 0; l < logits.size(); ++l) {
    for (std::size_t k = 0; k < logits[l].size(); ++k) {
      if (!mask[l][k]) continue;
      sum += log_sum_exp(logits[l][k]) - logits[l][k][tokens[l][k]];
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

// Source frame under the centre of output row j (frame i spans [i, i+1));
// a centre exactly on a boundary goes to the earlier frame.
inline int nn_index(int j, int n_in, int n_out) {
  const double centre = (j + 0.5) * n_in / static_cast<double>(n_out);
  int i = static_cast<int>(std::ceil(centre)) - 1;
  if (i < 0) i = 0;
  if (i > n_in - 1) i = n_in - 1;
  return i;
}

inline double seq_mse(const Mat& seq, const Mat& target) {
  const int n = static_cast<int>(seq.rows()), h = static_cast<int>(seq.cols());
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const int src = nn_index(j, static_cast<int>(target.rows()), n);
    for (int c = 0; c < h; ++c) {
      const double d = seq(j, c) - target(src, c);
      s += d * d;
    }
  }
  return s / (static_cast<double>(n) * h);
}

inline double symmetric_ce(const std::vector<std::vector<double>>& logits) {
  const std::size_t b = logits.size();
  double rows = 0.0, cols = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    rows += log_sum_exp(logits[i]) - logits[i][i];
    std::vector<double> col(b);
    for (std::size_t j = 0; j < b; ++j) col[j] = logits[j][i];
    cols += log_sum_exp(col) - logits[i][i];
  }
  return 0.5 * (rows / b + cols / b);
}

inline double clip_contrastive(const Mat& a, const Mat& b, double tau) {
  const std::size_t n = a.rows();
  std::vector<std::vector<double>> logits(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        dot += a(i, c) * b(j, c);
        na += a(i, c) * a(i, c);
        nb += b(j, c) * b(j, c);
      }
      logits[i][j] = dot / std::sqrt(na * nb) / tau;
    }
  }
  return symmetric_ce(logits);
}

inline double sq_dist_mean(const Mat& a, const Mat& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
  return s / static_cast<double>(a.rows() * a.cols());
}

inline double scav_contrastive(const std::vector<Mat>& v, const std::vector<Mat>& a, double tau) {
  const std::size_t n = v.size();
  std::vector<std::vector<double>> logits(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) logits[i][j] = -sq_dist_mean(v[i], a[j]) / tau;
  return symmetric_ce(logits);
}

}  // namespace maskgrid::oracle
