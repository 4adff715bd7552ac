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

#include "maskgrid/layers.hpp"

#include <cmath>
#include <numbers>

namespace maskgrid::nn {

LinearIds add_linear(ParamLayout& layout, const std::string& name, int in, int out) {
  return {layout.add(name + ".w", in, out, true), layout.add(name + ".b", 1, out)};
}

void init_linear(ParamVector& buf, const ParamLayout& layout, const LinearIds& ids,
                 Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(layout.entry(ids.w).rows));
  fill_uniform(buf, layout, ids.w, bound, rng);
  fill_constant(buf, layout, ids.b, 0.0);
}

Mat linear(const ParamCtx& p, const LinearIds& ids, const Mat& x) {
  Mat y = x * p.w(ids.w);
  y.rowwise() += p.w(ids.b).row(0);
  return y;
}

Mat linear_backward(const ParamCtx& p, const LinearIds& ids, const Mat& x, const Mat& dy) {
  p.g(ids.w).noalias() += x.transpose() * dy;
  p.g(ids.b).row(0) += dy.colwise().sum();
  return dy * p.w(ids.w).transpose();
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

Mat norm_core(const Mat& x, NormCache& cache) {
  const Eigen::Index n = x.rows(), w = x.cols();
  cache.xhat.resize(n, w);
  cache.rstd.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kNormEps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  return cache.xhat;
}

Mat norm_core_backward(const NormCache& cache, const Mat& dxhat) {
  Mat dx(dxhat.rows(), dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = dxhat.row(r).dot(cache.xhat.row(r)) / static_cast<double>(dxhat.cols());
    dx.row(r) = cache.rstd(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
  }
  return dx;
}

NormIds add_norm(ParamLayout& layout, const std::string& name, int width) {
  return {layout.add(name + ".g", 1, width), layout.add(name + ".b", 1, width)};
}

void init_norm(ParamVector& buf, const ParamLayout& layout, const NormIds& ids) {
  fill_constant(buf, layout, ids.g, 1.0);
  fill_constant(buf, layout, ids.b, 0.0);
}

Mat layer_norm(const ParamCtx& p, const NormIds& ids, const Mat& x, NormCache& cache) {
  Mat y = norm_core(x, cache);
  y.array().rowwise() *= p.w(ids.g).row(0).array();
  y.rowwise() += p.w(ids.b).row(0);
  return y;
}

Mat layer_norm_backward(const ParamCtx& p, const NormIds& ids, const NormCache& cache, const Mat& dy) {
  p.g(ids.g).row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  p.g(ids.b).row(0) += dy.colwise().sum();
  Mat dxhat = dy;
  dxhat.array().rowwise() *= p.w(ids.g).row(0).array();
  return norm_core_backward(cache, dxhat);
}

AttentionIds add_attention(ParamLayout& layout, const std::string& name, int width) {
  return {add_linear(layout, name + ".q", width, width), add_linear(layout, name + ".k", width, width),
          add_linear(layout, name + ".v", width, width), add_linear(layout, name + ".o", width, width)};
}

void init_attention(ParamVector& buf, const ParamLayout& layout, const AttentionIds& ids, Rng& rng) {
  init_linear(buf, layout, ids.q, rng);
  init_linear(buf, layout, ids.k, rng);
  init_linear(buf, layout, ids.v, rng);
  init_linear(buf, layout, ids.o, rng);
}

Mat attention(const ParamCtx& p, const AttentionIds& ids, int heads, const Mat& xq, const Mat& xkv,
              AttentionCache& c) {
  const int width = static_cast<int>(xq.cols());
  const int dh = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.xq = xq;
  c.xkv = xkv;
  c.q = linear(p, ids.q, xq);
  c.k = linear(p, ids.k, xkv);
  c.v = linear(p, ids.v, xkv);
  c.context.resize(xq.rows(), width);
  c.probs.resize(heads);
  for (int h = 0; h < heads; ++h) {
    Mat s = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double mx = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - mx).exp();
      s.row(r) /= s.row(r).sum();
    }
    c.context.middleCols(h * dh, dh).noalias() = s * c.v.middleCols(h * dh, dh);
    c.probs[h] = std::move(s);
  }
  return linear(p, ids.o, c.context);
}

void attention_backward(const ParamCtx& p, const AttentionIds& ids, int heads,
                        const AttentionCache& c, const Mat& dout, Mat& dxq, Mat& dxkv) {
  const int width = static_cast<int>(c.xq.cols());
  const int dh = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Mat dctx = linear_backward(p, ids.o, c.context, dout);
  Mat dq(c.q.rows(), width), dk(c.k.rows(), width), dv(c.v.rows(), width);
  for (int h = 0; h < heads; ++h) {
    const Mat& prob = c.probs[h];
    const auto dctx_h = dctx.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = prob.transpose() * dctx_h;
    Mat dprob = dctx_h * c.v.middleCols(h * dh, dh).transpose();
    // softmax adjoint, row-wise: ds = p * (dp - <dp, p>)
    const Vec inner = (dprob.array() * prob.array()).rowwise().sum();
    Mat ds = prob.array() * (dprob.array().colwise() - inner.array());
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  dxq = linear_backward(p, ids.q, c.xq, dq);
  dxkv = linear_backward(p, ids.k, c.xkv, dk);
  dxkv += linear_backward(p, ids.v, c.xkv, dv);
}

MlpIds add_mlp(ParamLayout& layout, const std::string& name, int in, int hidden, int out) {
  return {add_linear(layout, name + ".fc1", in, hidden), add_linear(layout, name + ".fc2", hidden, out)};
}

void init_mlp(ParamVector& buf, const ParamLayout& layout, const MlpIds& ids, Rng& rng) {
  init_linear(buf, layout, ids.fc1, rng);
  init_linear(buf, layout, ids.fc2, rng);
}

Mat mlp(const ParamCtx& p, const MlpIds& ids, const Mat& x, MlpCache& c) {
  c.x = x;
  c.pre = linear(p, ids.fc1, x);
  c.act = c.pre.unaryExpr([](double v) { return gelu(v); });
  return linear(p, ids.fc2, c.act);
}

Mat mlp_backward(const ParamCtx& p, const MlpIds& ids, const MlpCache& c, const Mat& dy) {
  Mat dact = linear_backward(p, ids.fc2, c.act, dy);
  dact.array() *= c.pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  return linear_backward(p, ids.fc1, c.x, dact);
}

BlockIds add_block(ParamLayout& layout, const std::string& name, int width, int mlp_hidden,
                   bool adaln, int cond_width, bool cross) {
  BlockIds ids;
  ids.adaln = adaln;
  ids.cross = cross;
  if (adaln) {
    ids.modulation = add_linear(layout, name + ".mod", cond_width, 6 * width);
  } else {
    ids.norm1 = add_norm(layout, name + ".norm1", width);
    ids.norm2 = add_norm(layout, name + ".norm2", width);
  }
  ids.self_attn = add_attention(layout, name + ".attn", width);
  if (cross) {
    ids.norm_cross = add_norm(layout, name + ".norm_x", width);
    ids.cross_attn = add_attention(layout, name + ".xattn", width);
  }
  ids.mlp = add_mlp(layout, name + ".mlp", width, mlp_hidden, width);
  return ids;
}

void init_block(ParamVector& buf, const ParamLayout& layout, const BlockIds& ids, Rng& rng) {
  if (ids.adaln) {
    init_linear(buf, layout, ids.modulation, rng, 0.1);
    // Start as identity modulation: shift 0, scale 1, gate 1.
    const auto& b = layout.entry(ids.modulation.b);
    const int width = b.cols / 6;
    for (int j = 0; j < width; ++j) {
      buf[b.offset + 1 * width + j] = 1.0;
      buf[b.offset + 2 * width + j] = 1.0;
      buf[b.offset + 4 * width + j] = 1.0;
      buf[b.offset + 5 * width + j] = 1.0;
    }
  } else {
    init_norm(buf, layout, ids.norm1);
    init_norm(buf, layout, ids.norm2);
  }
  init_attention(buf, layout, ids.self_attn, rng);
  if (ids.cross) {
    init_norm(buf, layout, ids.norm_cross);
    init_attention(buf, layout, ids.cross_attn, rng);
  }
  init_mlp(buf, layout, ids.mlp, rng);
}

Mat block(const ParamCtx& p, const BlockIds& ids, int heads, const Mat& x, const Mat* cond,
          const Mat* enc, BlockCache& c) {
  const int w = static_cast<int>(x.cols());
  c.x_in = x;
  if (ids.adaln) {
    require_shape(cond != nullptr && cond->rows() == x.rows(),
                  "AdaLN block needs a conditioning sequence aligned to the tokens");
    c.cond_in = *cond;
    c.cond_act = cond->unaryExpr([](double v) { return silu(v); });
    c.mod = linear(p, ids.modulation, c.cond_act);
    c.h1 = norm_core(x, c.n1).array() * c.mod.middleCols(w, w).array() + c.mod.middleCols(0, w).array();
  } else {
    c.h1 = layer_norm(p, ids.norm1, x, c.n1);
  }
  c.a = attention(p, ids.self_attn, heads, c.h1, c.h1, c.sa);
  if (ids.adaln) {
    c.x1 = x.array() + c.mod.middleCols(2 * w, w).array() * c.a.array();
  } else {
    c.x1 = x + c.a;
  }
  if (ids.cross) {
    require_shape(enc != nullptr && enc->cols() == x.cols(), "cross-attention block needs an encoder sequence");
    c.hc = layer_norm(p, ids.norm_cross, c.x1, c.nc);
    c.ca = attention(p, ids.cross_attn, heads, c.hc, *enc, c.xa);
    c.x2 = c.x1 + c.ca;
  } else {
    c.x2 = c.x1;
  }
  if (ids.adaln) {
    c.h2 = norm_core(c.x2, c.n2).array() * c.mod.middleCols(4 * w, w).array() +
           c.mod.middleCols(3 * w, w).array();
  } else {
    c.h2 = layer_norm(p, ids.norm2, c.x2, c.n2);
  }
  c.f = mlp(p, ids.mlp, c.h2, c.m);
  if (ids.adaln) return c.x2.array() + c.mod.middleCols(5 * w, w).array() * c.f.array();
  return c.x2 + c.f;
}

Mat block_backward(const ParamCtx& p, const BlockIds& ids, int heads, const BlockCache& c,
                   const Mat& dout, Mat* dcond, Mat* denc) {
  const int w = static_cast<int>(c.x_in.cols());
  Mat dmod;
  if (ids.adaln) dmod.setZero(c.mod.rows(), c.mod.cols());

  // out = x2 + gate2 * f
  Mat dx2 = dout;
  Mat df = dout;
  if (ids.adaln) {
    dmod.middleCols(5 * w, w) = dout.array() * c.f.array();
    df.array() *= c.mod.middleCols(5 * w, w).array();
  }
  const Mat dh2 = mlp_backward(p, ids.mlp, c.m, df);
  if (ids.adaln) {
    dmod.middleCols(4 * w, w) = dh2.array() * c.n2.xhat.array();
    dmod.middleCols(3 * w, w) = dh2;
    dx2 += norm_core_backward(c.n2, dh2.array() * c.mod.middleCols(4 * w, w).array());
  } else {
    dx2 += layer_norm_backward(p, ids.norm2, c.n2, dh2);
  }

  Mat dx1 = dx2;
  if (ids.cross) {
    Mat dhc, denc_local;
    attention_backward(p, ids.cross_attn, heads, c.xa, dx2, dhc, denc_local);
    *denc += denc_local;
    dx1 += layer_norm_backward(p, ids.norm_cross, c.nc, dhc);
  }

  // x1 = x + gate1 * a
  Mat dx = dx1;
  Mat da = dx1;
  if (ids.adaln) {
    dmod.middleCols(2 * w, w) = dx1.array() * c.a.array();
    da.array() *= c.mod.middleCols(2 * w, w).array();
  }
  Mat dq, dkv;
  attention_backward(p, ids.self_attn, heads, c.sa, da, dq, dkv);
  const Mat dh1 = dq + dkv;
  if (ids.adaln) {
    dmod.middleCols(1 * w, w) = dh1.array() * c.n1.xhat.array();
    dmod.middleCols(0, w) = dh1;
    dx += norm_core_backward(c.n1, dh1.array() * c.mod.middleCols(w, w).array());
    Mat dcond_act = linear_backward(p, ids.modulation, c.cond_act, dmod);
    dcond_act.array() *= c.cond_in.unaryExpr([](double v) { return silu_grad(v); }).array();
    *dcond += dcond_act;
  } else {
    dx += layer_norm_backward(p, ids.norm1, c.n1, dh1);
  }
  return dx;
}

}  // namespace maskgrid::nn
