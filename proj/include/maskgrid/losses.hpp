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

#include <optional>

#include "maskgrid/codegram.hpp"
#include "maskgrid/model.hpp"

namespace maskgrid {

/// Mean over masked positions of -log softmax(logits[l,k])[token[l,k]];
/// 0 when nothing is masked.
double masked_ce(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask);

/// Sum of the masked negative log-likelihoods. When dlogits is given it is
/// overwritten with scale * d(sum)/d(logits) (zero at unmasked positions).
/// Returns the number of masked positions through `count`.
double masked_nll_sum(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask,
                      int& count, Mat* dlogits = nullptr, double scale = 1.0);

/// Fraction of masked positions whose argmax (lowest index on ties) is the
/// true token; nullopt when nothing is masked.
std::optional<double> masked_token_accuracy(const LogitsGrid& logits, const Codegram& codegram,
                                            const MaskTensor& mask);
/// Raw counts for batch aggregation.
void masked_token_hits(const LogitsGrid& logits, const Codegram& codegram, const MaskTensor& mask,
                       int& hits, int& count);

struct SeqMseResult {
  double value = 0.0;
  Mat d_seq;     // adjoint w.r.t. the encoder sequence (N x H)
  Mat d_target;  // adjoint w.r.t. the un-resampled target (N' x H)
};
/// Mean squared difference after nearest-neighbour resampling of the target
/// to the sequence length.
SeqMseResult seq_mse(const Mat& seq, const Mat& target, bool want_grads = false);

struct ContrastiveResult {
  double value = 0.0;
  Mat d_logits;  // B x B
};
/// Symmetric cross-entropy with the diagonal as labels: the mean of the
/// row-wise and column-wise losses.
ContrastiveResult symmetric_ce(const Mat& logits, bool want_grads = false);

struct ClipContrastiveResult {
  double value = 0.0;
  Mat d_a, d_b;        // adjoints w.r.t. the unnormalised inputs
  double d_scale = 0;  // adjoint w.r.t. the logit scale 1/tau
};
/// CLIP-style loss over a batch of (a_i, b_i) pairs: rows are L2-normalised,
/// logits = scale * cosine similarity.
ClipContrastiveResult clip_contrastive_scaled(const Mat& a, const Mat& b, double scale,
                                              bool want_grads = false);
double clip_contrastive(const Mat& a, const Mat& b, double tau);

}  // namespace maskgrid
