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

#include <string>
#include <vector>

#include "maskgrid/common.hpp"
#include "maskgrid/params.hpp"

namespace maskgrid::nn {

/// Read-only parameters plus an optional gradient buffer with the same
/// layout. Backward passes accumulate into grads.
struct ParamCtx {
  const ParamLayout& layout;
  const ParamVector& values;
  ParamVector* grads = nullptr;

  ConstMatMap w(int id) const { return layout.map(values, id); }
  MatMap g(int id) const { return layout.map(*grads, id); }
};

struct LinearIds {
  int w = -1;  // in x out
  int b = -1;  // 1 x out
};
LinearIds add_linear(ParamLayout& layout, const std::string& name, int in, int out);
void init_linear(ParamVector& buf, const ParamLayout& layout, const LinearIds& ids,
                 Rng& rng, double gain = 1.0);

Mat linear(const ParamCtx& p, const LinearIds& ids, const Mat& x);
/// Accumulates weight/bias grads and returns dx.
Mat linear_backward(const ParamCtx& p, const LinearIds& ids, const Mat& x, const Mat& dy);

double gelu(double x);
double gelu_grad(double x);
double silu(double x);
double silu_grad(double x);

struct NormCache {
  Mat xhat;
  Vec rstd;
};
inline constexpr double kNormEps = 1e-5;

/// Per-row standardisation without affine terms.
Mat norm_core(const Mat& x, NormCache& cache);
Mat norm_core_backward(const NormCache& cache, const Mat& dxhat);

struct NormIds {
  int g = -1;
  int b = -1;
};
NormIds add_norm(ParamLayout& layout, const std::string& name, int width);
void init_norm(ParamVector& buf, const ParamLayout& layout, const NormIds& ids);
Mat layer_norm(const ParamCtx& p, const NormIds& ids, const Mat& x, NormCache& cache);
Mat layer_norm_backward(const ParamCtx& p, const NormIds& ids, const NormCache& cache, const Mat& dy);

struct AttentionIds {
  LinearIds q, k, v, o;
};
struct AttentionCache {
  Mat xq, xkv, q, k, v, context;
  std::vector<Mat> probs;  // per head, Lq x Lk
};
AttentionIds add_attention(ParamLayout& layout, const std::string& name, int width);
void init_attention(ParamVector& buf, const ParamLayout& layout, const AttentionIds& ids, Rng& rng);

/// Unmasked multi-head attention from xq (queries) onto xkv (keys/values).
Mat attention(const ParamCtx& p, const AttentionIds& ids, int heads, const Mat& xq, const Mat& xkv,
              AttentionCache& cache);
void attention_backward(const ParamCtx& p, const AttentionIds& ids, int heads,
                        const AttentionCache& cache, const Mat& dout, Mat& dxq, Mat& dxkv);

struct MlpIds {
  LinearIds fc1, fc2;
};
struct MlpCache {
  Mat x, pre, act;
};
MlpIds add_mlp(ParamLayout& layout, const std::string& name, int in, int hidden, int out);
void init_mlp(ParamVector& buf, const ParamLayout& layout, const MlpIds& ids, Rng& rng);
Mat mlp(const ParamCtx& p, const MlpIds& ids, const Mat& x, MlpCache& cache);
Mat mlp_backward(const ParamCtx& p, const MlpIds& ids, const MlpCache& cache, const Mat& dy);

/// Pre-norm transformer block. With `adaln` the two norms take per-position
/// shift/scale from the conditioning sequence and the residual branches are
/// gated; with `cross` a cross-attention sub-layer onto the encoder output
/// sits between self-attention and the MLP.
struct BlockIds {
  bool adaln = false;
  bool cross = false;
  LinearIds modulation;  // cond width -> 6 * width: shift1 scale1 gate1 shift2 scale2 gate2
  NormIds norm1, norm2, norm_cross;
  AttentionIds self_attn, cross_attn;
  MlpIds mlp;
};
struct BlockCache {
  Mat x_in, cond_in, cond_act, mod;
  NormCache n1, n2, nc;
  Mat h1, a, x1, hc, ca, x2, h2, f;
  AttentionCache sa, xa;
  MlpCache m;
};
BlockIds add_block(ParamLayout& layout, const std::string& name, int width, int mlp_hidden,
                   bool adaln, int cond_width, bool cross);
void init_block(ParamVector& buf, const ParamLayout& layout, const BlockIds& ids, Rng& rng);

Mat block(const ParamCtx& p, const BlockIds& ids, int heads, const Mat& x, const Mat* cond,
          const Mat* enc, BlockCache& cache);
/// Returns dx; accumulates into dcond / denc when the block uses them.
Mat block_backward(const ParamCtx& p, const BlockIds& ids, int heads, const BlockCache& cache,
                   const Mat& dout, Mat* dcond, Mat* denc);

}  // namespace maskgrid::nn
