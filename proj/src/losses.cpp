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

#include "maskgrid/losses.hpp"

#include <cmath>

#include "maskgrid/conditioning.hpp"

namespace maskgrid {

namespace {

void check_grid(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask) {
  require_shape(logits.length == codegram.length() && logits.levels == codegram.levels() &&
                    logits.vocab == codegram.spec().vocab_size,
                "logits grid does not match codegram shape");
  require_shape(mask.length() == codegram.length() && mask.levels() == codegram.levels(),
                "mask does not match codegram shape");
}

double log_sum_exp(const auto& row) {
  const double mx = row.maxCoeff();
  return mx + std::log((row.array() - mx).exp().sum());
}

}  // namespace

double masked_nll_sum(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask,
                      int& count, Mat* dlogits, double scale) {
  check_grid(logits, codegram, mask);
  if (dlogits) dlogits->setZero(logits.values.rows(), logits.values.cols());
  double sum = 0.0;
  count = 0;
  for (int l = 0; l < logits.length; ++l) {
    for (int k = 0; k < logits.levels; ++k) {
      if (!mask.at(l, k)) continue;
      const auto row = logits.row(l, k);
      const double lse = log_sum_exp(row);
      const int t = codegram.at(l, k);
      sum += lse - row(t);
      ++count;
      if (dlogits) {
        auto drow = dlogits->row(l).segment(k * logits.vocab, logits.vocab);
        drow = (row.array() - lse).exp().matrix() * scale;
        drow(t) -= scale;
      }
    }
  }
  return sum;
}

double masked_ce(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask) {
  int count = 0;
  const double sum = masked_nll_sum(logits, codegram, mask, count);
  return count == 0 ? 0.0 : sum / count;
}

void masked_token_hits(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask,
                       int& hits, int& count) {
  check_grid(logits, codegram, mask);
  hits = 0;
  count = 0;
  for (int l = 0; l < logits.length; ++l) {
    for (int k = 0; k < logits.levels; ++k) {
      if (!mask.at(l, k)) continue;
      const auto row = logits.row(l, k);
      int best = 0;
      for (int d = 1; d < logits.vocab; ++d) {
        if (row(d) > row(best)) best = d;
      }
      hits += best == codegram.at(l, k);
      ++count;
    }
  }
}

std::optional<double> masked_token_accuracy(const LogitsGrid& logits, const Codegram& codegram,
                                            const MaskTensor& mask) {
  int hits = 0, count = 0;
  masked_token_hits(logits, codegram, mask, hits, count);
  if (count == 0) return std::nullopt;
  return static_cast<double>(hits) / count;
}

SeqMseResult seq_mse(const Mat& seq, const Mat& target, bool want_grads) {
  require_shape(seq.cols() == target.cols(), "seq_mse width mismatch: " + std::to_string(seq.cols()) +
                                                  " vs " + std::to_string(target.cols()));
  require_arg(seq.rows() >= 1 && target.rows() >= 1, "seq_mse needs non-empty sequences");
  const auto idx = resample_indices(static_cast<int>(target.rows()), static_cast<int>(seq.rows()));
  const double denom = static_cast<double>(seq.size());
  SeqMseResult r;
  Mat diff(seq.rows(), seq.cols());
  for (Eigen::Index i = 0; i < seq.rows(); ++i) diff.row(i) = seq.row(i) - target.row(idx[i]);
  r.value = diff.squaredNorm() / denom;
  if (want_grads) {
    r.d_seq = diff * (2.0 / denom);
    r.d_target.setZero(target.rows(), target.cols());
    for (Eigen::Index i = 0; i < seq.rows(); ++i) r.d_target.row(idx[i]) -= r.d_seq.row(i);
  }
  return r;
}

ContrastiveResult symmetric_ce(const Mat& logits, bool want_grads) {
  const Eigen::Index b = logits.rows();
  require_arg(b >= 2, "contrastive loss needs a batch of at least 2");
  require_shape(logits.cols() == b, "contrastive logits must be square");
  ContrastiveResult r;
  Mat p_rows(b, b), p_cols(b, b);
  double row_loss = 0.0, col_loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double lse = log_sum_exp(logits.row(i));
    row_loss += lse - logits(i, i);
    p_rows.row(i) = (logits.row(i).array() - lse).exp();
  }
  for (Eigen::Index j = 0; j < b; ++j) {
    const double lse = log_sum_exp(logits.col(j));
    col_loss += lse - logits(j, j);
    p_cols.col(j) = (logits.col(j).array() - lse).exp();
  }
  r.value = 0.5 * (row_loss + col_loss) / static_cast<double>(b);
  if (want_grads) {
    const Mat eye = Mat::Identity(b, b);
    r.d_logits = (0.5 / static_cast<double>(b)) * ((p_rows - eye) + (p_cols - eye));
  }
  return r;
}

ClipContrastiveResult clip_contrastive_scaled(const Mat& a, const Mat& b, double scale, bool want_grads) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "contrastive pair batches differ in shape");
  require_arg(a.rows() >= 2, "contrastive loss needs a batch of at least 2");
  const Eigen::Index n = a.rows();
  Mat an(n, a.cols()), bn(n, b.cols());
  Vec a_norm(n), b_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a_norm(i) = a.row(i).norm();
    b_norm(i) = b.row(i).norm();
    require_arg(a_norm(i) > 0.0 && b_norm(i) > 0.0, "contrastive inputs must be non-zero");
    an.row(i) = a.row(i) / a_norm(i);
    bn.row(i) = b.row(i) / b_norm(i);
  }
  const Mat cos = an * bn.transpose();
  const auto ce = symmetric_ce(cos * scale, want_grads);
  ClipContrastiveResult r;
  r.value = ce.value;
  if (want_grads) {
    r.d_scale = (ce.d_logits.array() * cos.array()).sum();
    const Mat dcos = ce.d_logits * scale;
    const Mat dan = dcos * bn;
    const Mat dbn = dcos.transpose() * an;
    r.d_a.resize(n, a.cols());
    r.d_b.resize(n, b.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      // d/dx of x/|x|: (g - y (y.g)) / |x|
      r.d_a.row(i) = (dan.row(i) - an.row(i) * an.row(i).dot(dan.row(i))) / a_norm(i);
      r.d_b.row(i) = (dbn.row(i) - bn.row(i) * bn.row(i).dot(dbn.row(i))) / b_norm(i);
    }
  }
  return r;
}

double clip_contrastive(const Mat& a, const Mat& b, double tau) {
  require_arg(tau > 0.0, "temperature must be positive");
  return clip_contrastive_scaled(a, b, 1.0 / tau).value;
}

}  // namespace maskgrid
