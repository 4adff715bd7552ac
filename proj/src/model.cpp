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

#include "maskgrid/model.hpp"

#include <algorithm>
#include <cmath>

namespace maskgrid {

std::string structure_name(Structure s) {
  switch (s) {
    case Structure::adaln: return "adaln";
    case Structure::seq2seq: return "seq2seq";
    case Structure::hybrid: return "hybrid";
  }
  return "?";
}

Structure parse_structure(const std::string& name) {
  if (name == "adaln") return Structure::adaln;
  if (name == "seq2seq") return Structure::seq2seq;
  if (name == "hybrid") return Structure::hybrid;
  throw InvalidArgument("unknown structure '" + name + "' (expected adaln, seq2seq or hybrid)");
}

void ModelConfig::validate() const {
  spec.validate();
  require_arg(hidden >= 1 && heads >= 1 && hidden % heads == 0, "hidden must be divisible by heads");
  require_arg(depth >= 1, "depth must be >= 1");
  require_arg(mlp_ratio >= 1, "mlp_ratio must be >= 1");
  require_arg(max_len >= 1 && max_cond_len >= 1, "max lengths must be >= 1");
  require_arg(!streams.empty(), "model needs at least one conditioning stream");
  require_arg(cond_dropout_prob >= 0.0 && cond_dropout_prob <= 1.0, "cond_dropout_prob must lie in [0, 1]");
  bool clip = false, s3d = false;
  for (const auto& s : streams) {
    require_arg(s.channels >= 1 && s.frames >= 1, "stream '" + s.name + "' needs channels and frames >= 1");
    clip |= s.role == StreamRole::frame_semantic;
    s3d |= s.role == StreamRole::alignment_sensitive;
  }
  if (has_encoder()) {
    require_arg(clip, structure_name(structure) + " needs a clip-like stream");
    require_arg(encoder_depth >= 1, "encoder_depth must be >= 1");
    require_arg(aux_channels >= 1, structure_name(structure) + " needs aux_channels >= 1");
  }
  if (structure == Structure::hybrid) require_arg(s3d, "hybrid needs an s3d-like stream");
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  config_.spec.embed_dim = config_.hidden;
  const int h = config_.hidden;
  const int k = config_.spec.levels;
  const int d = config_.spec.vocab_size;
  const int n_streams = static_cast<int>(config_.streams.size());

  for (int lvl = 0; lvl < k; ++lvl)
    tok_emb_.push_back(layout_.add("tok.emb." + std::to_string(lvl), d, h));
  tok_mask_ = layout_.add("tok.mask", k, h);
  tok_pos_ = layout_.add("tok.pos", config_.max_len, h);

  first_cond_param_ = static_cast<int>(layout_.entries().size());
  for (const auto& s : config_.streams)
    stream_proj_.push_back(nn::add_mlp(layout_, "cond." + s.name, s.channels, h, h));
  end_cond_param_ = static_cast<int>(layout_.entries().size());
  null_rows_ = layout_.add("null.rows", n_streams, h);

  const int mlp_hidden = config_.mlp_ratio * h;
  if (config_.has_encoder()) {
    enc_in_ = nn::add_linear(layout_, "enc.in", n_streams * h, h);
    enc_cls_ = layout_.add("enc.cls", 1, h);
    enc_pos_ = layout_.add("enc.pos", config_.max_cond_len + 1, h);
    for (int i = 0; i < config_.encoder_depth; ++i)
      enc_blocks_.push_back(nn::add_block(layout_, "enc.blk." + std::to_string(i), h, mlp_hidden,
                                          false, 0, false));
    enc_norm_ = nn::add_norm(layout_, "enc.norm", h);
  }
  int cond_width = 0;
  if (config_.structure == Structure::adaln) {
    cond_width = n_streams * h;
  } else if (config_.structure == Structure::hybrid) {
    for (const auto& s : config_.streams) cond_width += s.role == StreamRole::alignment_sensitive ? h : 0;
  }
  for (int i = 0; i < config_.depth; ++i)
    dec_blocks_.push_back(nn::add_block(layout_, "dec.blk." + std::to_string(i), h, mlp_hidden,
                                        config_.has_adaln(), cond_width, config_.has_encoder()));
  dec_norm_ = nn::add_norm(layout_, "dec.norm", h);
  head_ = nn::add_linear(layout_, "head", h, k * d);
  if (config_.has_encoder()) {
    aux_proj_ = nn::add_linear(layout_, "aux.proj", config_.aux_channels, h);
    log_scale_ = layout_.add("aux.log_scale", 1, 1);
  }
}

ParamVector Model::init_params(std::uint64_t seed) const {
  ParamVector p(layout_.size(), 0.0);
  Rng rng(derive_seed(seed, "model.init"));
  const double emb_bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
  for (int id : tok_emb_) fill_uniform(p, layout_, id, emb_bound, rng);
  fill_uniform(p, layout_, tok_mask_, emb_bound, rng);
  fill_uniform(p, layout_, tok_pos_, emb_bound, rng);
  for (const auto& ids : stream_proj_) nn::init_mlp(p, layout_, ids, rng);
  fill_uniform(p, layout_, null_rows_, emb_bound, rng);
  if (config_.has_encoder()) {
    nn::init_linear(p, layout_, enc_in_, rng);
    fill_uniform(p, layout_, enc_cls_, emb_bound, rng);
    fill_uniform(p, layout_, enc_pos_, emb_bound, rng);
    for (const auto& b : enc_blocks_) nn::init_block(p, layout_, b, rng);
    nn::init_norm(p, layout_, enc_norm_);
  }
  for (const auto& b : dec_blocks_) nn::init_block(p, layout_, b, rng);
  nn::init_norm(p, layout_, dec_norm_);
  nn::init_linear(p, layout_, head_, rng);
  if (config_.has_encoder()) {
    nn::init_linear(p, layout_, aux_proj_, rng);
    fill_constant(p, layout_, log_scale_, std::log(1.0 / kInitTemperature));
  }
  return p;
}

std::vector<StreamShape> Model::stream_shapes(const ConditioningBundle* bundle) const {
  std::vector<StreamShape> shapes;
  for (std::size_t i = 0; i < config_.streams.size(); ++i) {
    const auto& s = config_.streams[i];
    const int frames = bundle ? static_cast<int>(bundle->streams[i].features.rows()) : s.frames;
    shapes.push_back({s.role, frames, config_.hidden});
  }
  return shapes;
}

namespace {

void check_finite(const Mat& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite activation in " + where);
}

}  // namespace

ForwardOutput Model::forward(const ParamVector& params, std::span<const std::int32_t> tokens,
                             int length, const MaskTensor& mask, const ConditioningBundle* bundle,
                             ForwardCache* cache) const {
  require_shape(params.size() == layout_.size(), "parameter buffer does not match model layout");
  require_arg(length >= 1 && length <= config_.max_len,
              "token length " + std::to_string(length) + " outside [1, " + std::to_string(config_.max_len) + "]");
  require_shape(tokens.size() == static_cast<std::size_t>(length) * config_.spec.levels,
                "token grid size does not match L*K");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  const nn::ParamCtx p{layout_, params, nullptr};
  const int h = config_.hidden;
  const int n_streams = static_cast<int>(config_.streams.size());

  if (bundle) {
    bundle->validate();
    require_shape(static_cast<int>(bundle->streams.size()) == n_streams,
                  "bundle has " + std::to_string(bundle->streams.size()) + " streams, model expects " +
                      std::to_string(n_streams));
    for (int i = 0; i < n_streams; ++i) {
      const auto& got = bundle->streams[i];
      const auto& want = config_.streams[i];
      require_shape(got.role == want.role, "stream " + std::to_string(i) + " role mismatch");
      require_shape(got.features.cols() == want.channels,
                    "stream '" + want.name + "' has " + std::to_string(got.features.cols()) +
                        " channels, model expects " + std::to_string(want.channels));
    }
  }

  // Token embedding: sum over levels plus learned positions.
  EmbeddingView view;
  view.vocab_size = config_.spec.vocab_size;
  view.embed_dim = h;
  for (int id : tok_emb_) view.levels.push_back(params.data() + layout_.entry(id).offset);
  view.mask_rows = params.data() + layout_.entry(tok_mask_).offset;
  Mat x;
  embed_sum_into(tokens, length, config_.spec.levels, mask, view, x);
  x += p.w(tok_pos_).topRows(length);

  // Conditioning front-ends (or NULL substitutes).
  c.unconditional = bundle == nullptr;
  c.projected.resize(n_streams);
  c.stream_mlp.resize(n_streams);
  for (int i = 0; i < n_streams; ++i) {
    if (bundle) {
      c.stream_features.push_back(&bundle->streams[i].features);
      c.projected[i] = nn::mlp(p, stream_proj_[i], bundle->streams[i].features, c.stream_mlp[i]);
    } else {
      c.projected[i] = p.w(null_rows_).row(i).replicate(config_.streams[i].frames, 1);
    }
  }
  std::vector<const Mat*> projected_ptrs;
  for (const auto& m : c.projected) projected_ptrs.push_back(&m);
  const auto shapes = stream_shapes(bundle);

  if (config_.has_adaln()) {
    const auto path = config_.structure == Structure::hybrid ? ConditioningPath::hybrid_adaln
                                                             : ConditioningPath::adaln;
    c.adaln_layout = conditioning_layout(shapes, path, length);
    c.cond = assemble_conditioning(projected_ptrs, c.adaln_layout);
  }

  Mat enc_out;
  if (config_.has_encoder()) {
    c.enc_layout = conditioning_layout(shapes, ConditioningPath::seq2seq, 0);
    c.enc_in = assemble_conditioning(projected_ptrs, c.enc_layout);
    const int n = static_cast<int>(c.enc_in.rows());
    require_arg(n <= config_.max_cond_len, "encoder input length " + std::to_string(n) +
                                               " exceeds max_cond_len " + std::to_string(config_.max_cond_len));
    Mat e(n + 1, h);
    e.row(0) = p.w(enc_cls_).row(0);
    e.bottomRows(n) = nn::linear(p, enc_in_, c.enc_in);
    e += p.w(enc_pos_).topRows(n + 1);
    c.enc_blocks.resize(enc_blocks_.size());
    for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
      e = nn::block(p, enc_blocks_[i], config_.heads, e, nullptr, nullptr, c.enc_blocks[i]);
      check_finite(e, "encoder block " + std::to_string(i));
    }
    enc_out = nn::layer_norm(p, enc_norm_, e, c.enc_norm);
  }

  c.dec_blocks.resize(dec_blocks_.size());
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    x = nn::block(p, dec_blocks_[i], config_.heads, x, config_.has_adaln() ? &c.cond : nullptr,
                  config_.has_encoder() ? &enc_out : nullptr, c.dec_blocks[i]);
    check_finite(x, "decoder block " + std::to_string(i));
  }
  c.dec_final = nn::layer_norm(p, dec_norm_, x, c.dec_norm);

  ForwardOutput out;
  out.logits = LogitsGrid(length, config_.spec.levels, config_.spec.vocab_size);
  out.logits.values = nn::linear(p, head_, c.dec_final);
  check_finite(out.logits.values, "output head");
  if (config_.has_encoder()) {
    EncoderOutput eo;
    eo.cls = enc_out.row(0);
    eo.sequence = enc_out.bottomRows(enc_out.rows() - 1);
    out.encoder = std::move(eo);
  }

  c.length = length;
  c.tokens.assign(tokens.begin(), tokens.end());
  c.mask = mask;
  c.valid = true;
  return out;
}

void Model::backward(const ParamVector& params, const ForwardCache& c, const Mat& dlogits,
                     const Mat* d_enc_seq, const RowVec* d_cls, ParamVector& grads) const {
  if (!c.valid) throw InvalidArgument("backward called without a cached forward pass");
  require_shape(grads.size() == layout_.size(), "gradient buffer does not match model layout");
  require_shape(dlogits.rows() == c.length &&
                    dlogits.cols() == static_cast<Eigen::Index>(config_.spec.levels) * config_.spec.vocab_size,
                "logit adjoint shape mismatch");
  const nn::ParamCtx p{layout_, params, &grads};
  const int h = config_.hidden;
  const int n_streams = static_cast<int>(config_.streams.size());

  Mat dx = nn::linear_backward(p, head_, c.dec_final, dlogits);
  dx = nn::layer_norm_backward(p, dec_norm_, c.dec_norm, dx);

  Mat dcond, denc;
  if (config_.has_adaln()) dcond.setZero(c.cond.rows(), c.cond.cols());
  if (config_.has_encoder()) denc.setZero(c.enc_in.rows() + 1, h);
  for (std::size_t i = dec_blocks_.size(); i-- > 0;) {
    dx = nn::block_backward(p, dec_blocks_[i], config_.heads, c.dec_blocks[i], dx,
                            config_.has_adaln() ? &dcond : nullptr,
                            config_.has_encoder() ? &denc : nullptr);
  }

  // Token path.
  p.g(tok_pos_).topRows(c.length) += dx;
  const int k_levels = config_.spec.levels;
  for (int l = 0; l < c.length; ++l) {
    for (int k = 0; k < k_levels; ++k) {
      const std::size_t flat = static_cast<std::size_t>(l) * k_levels + k;
      if (c.mask.flat(flat)) {
        p.g(tok_mask_).row(k) += dx.row(l);
      } else {
        p.g(tok_emb_[k]).row(c.tokens[flat]) += dx.row(l);
      }
    }
  }

  std::vector<Mat> dproj(n_streams);
  for (int i = 0; i < n_streams; ++i) dproj[i].setZero(c.projected[i].rows(), c.projected[i].cols());

  if (config_.has_encoder()) {
    const Eigen::Index n = c.enc_in.rows();
    if (d_enc_seq) {
      require_shape(d_enc_seq->rows() == n && d_enc_seq->cols() == h, "encoder sequence adjoint shape mismatch");
      denc.bottomRows(n) += *d_enc_seq;
    }
    if (d_cls) denc.row(0) += *d_cls;
    Mat de = nn::layer_norm_backward(p, enc_norm_, c.enc_norm, denc);
    for (std::size_t i = enc_blocks_.size(); i-- > 0;)
      de = nn::block_backward(p, enc_blocks_[i], config_.heads, c.enc_blocks[i], de, nullptr, nullptr);
    p.g(enc_pos_).topRows(n + 1) += de;
    p.g(enc_cls_).row(0) += de.row(0);
    const Mat din = nn::linear_backward(p, enc_in_, c.enc_in, de.bottomRows(n));
    scatter_conditioning(din, c.enc_layout, dproj);
  }
  if (config_.has_adaln()) scatter_conditioning(dcond, c.adaln_layout, dproj);

  for (int i = 0; i < n_streams; ++i) {
    if (c.unconditional) {
      p.g(null_rows_).row(i) += dproj[i].colwise().sum();
    } else {
      nn::mlp_backward(p, stream_proj_[i], c.stream_mlp[i], dproj[i]);
    }
  }
}

Mat Model::project_aux(const ParamVector& params, const Mat& targets) const {
  require_arg(config_.has_encoder(), "aux projection exists only for seq2seq/hybrid structures");
  require_shape(targets.cols() == config_.aux_channels,
                "aux targets have " + std::to_string(targets.cols()) + " channels, model expects " +
                    std::to_string(config_.aux_channels));
  return nn::linear(nn::ParamCtx{layout_, params, nullptr}, aux_proj_, targets);
}

void Model::project_aux_backward(const ParamVector& params, const Mat& targets,
                                 const Mat& dprojected, ParamVector& grads) const {
  nn::linear_backward(nn::ParamCtx{layout_, params, &grads}, aux_proj_, targets, dprojected);
}

double Model::contrastive_scale(const ParamVector& params) const {
  const double raw = params[layout_.entry(log_scale_).offset];
  return std::exp(std::clamp(raw, 0.0, std::log(kMaxContrastiveScale)));
}

void Model::contrastive_scale_backward(const ParamVector& params, double dscale,
                                       ParamVector& grads) const {
  const std::size_t off = layout_.entry(log_scale_).offset;
  const double raw = params[off];
  if (raw > 0.0 && raw < std::log(kMaxContrastiveScale)) grads[off] += dscale * std::exp(raw);
}

bool Model::is_conditioning_param(int id) const { return id >= first_cond_param_ && id < end_cond_param_; }

}  // namespace maskgrid
