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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskgrid/codegram.hpp"
#include "maskgrid/conditioning.hpp"
#include "maskgrid/layers.hpp"
#include "maskgrid/params.hpp"

namespace maskgrid {

enum class Structure { adaln, seq2seq, hybrid };
std::string structure_name(Structure s);
Structure parse_structure(const std::string& name);

/// Declared shape of one conditioning stream. `frames` is the length used
/// for the NULL (unconditional) substitute.
struct StreamSpec {
  std::string name;
  StreamRole role = StreamRole::frame_semantic;
  int channels = 1;
  int frames = 1;
  bool operator==(const StreamSpec&) const = default;
};

struct ModelConfig {
  Structure structure = Structure::adaln;
  CodebookSpec spec{4, 64, 128, 86.1};
  int hidden = 128;
  int heads = 4;
  int depth = 4;
  int encoder_depth = 2;
  int mlp_ratio = 4;
  int max_len = 86;       // longest token sequence (learned positions)
  int max_cond_len = 64;  // longest encoder input, excluding [CLS]
  std::vector<StreamSpec> streams;
  int aux_channels = 0;  // width of the beats-like target features
  double cond_dropout_prob = 0.10;

  bool has_encoder() const { return structure != Structure::adaln; }
  bool has_adaln() const { return structure != Structure::seq2seq; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// L x K x D scores, stored as an L x (K*D) matrix (level-major columns).
struct LogitsGrid {
  int length = 0;
  int levels = 0;
  int vocab = 0;
  Mat values;

  LogitsGrid() = default;
  LogitsGrid(int l, int k, int d) : length(l), levels(k), vocab(d), values(Mat::Zero(l, k * d)) {}
  double at(int l, int k, int d) const { return values(l, k * vocab + d); }
  double& at(int l, int k, int d) { return values(l, k * vocab + d); }
  auto row(int l, int k) const { return values.row(l).segment(k * vocab, vocab); }
  auto row(int l, int k) { return values.row(l).segment(k * vocab, vocab); }
};

struct EncoderOutput {
  RowVec cls;    // pooled [CLS] position
  Mat sequence;  // N x hidden, [CLS] excluded
};

struct ForwardOutput {
  LogitsGrid logits;
  std::optional<EncoderOutput> encoder;
};

/// Activations kept by forward() for backward().
struct ForwardCache {
  bool valid = false;
  int length = 0;
  std::vector<std::int32_t> tokens;
  MaskTensor mask;
  bool unconditional = false;
  std::vector<const Mat*> stream_features;  // borrowed from the bundle
  std::vector<nn::MlpCache> stream_mlp;
  std::vector<Mat> projected;
  ConditioningLayout adaln_layout, enc_layout;
  Mat cond, enc_in;
  std::vector<nn::BlockCache> enc_blocks;
  nn::NormCache enc_norm;
  std::vector<nn::BlockCache> dec_blocks;
  nn::NormCache dec_norm;
  Mat dec_final;
};

/// Masked-token transformer over codegrams.
///
/// Parameters live in an external flat buffer described by layout(); the
/// model itself is immutable, so one instance can serve many threads.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  ParamVector init_params(std::uint64_t seed) const;

  /// bundle == nullptr selects the unconditional mode (NULL embeddings).
  /// Tokens at masked positions are ignored. Pass a cache to enable backward.
  ForwardOutput forward(const ParamVector& params, std::span<const std::int32_t> tokens,
                        int length, const MaskTensor& mask, const ConditioningBundle* bundle,
                        ForwardCache* cache = nullptr) const;
  ForwardOutput forward(const ParamVector& params, const Codegram& codegram,
                        const MaskTensor& mask, const ConditioningBundle* bundle,
                        ForwardCache* cache = nullptr) const {
    return forward(params, codegram.tokens(), codegram.length(), mask, bundle, cache);
  }

  /// Accumulates parameter gradients into grads. d_enc_seq / d_cls are the
  /// adjoints of the encoder outputs and may be null.
  void backward(const ParamVector& params, const ForwardCache& cache,
                const Mat& dlogits, const Mat* d_enc_seq, const RowVec* d_cls,
                ParamVector& grads) const;

  /// Learnable linear projection of beats-like targets to the hidden width.
  Mat project_aux(const ParamVector& params, const Mat& targets) const;
  void project_aux_backward(const ParamVector& params, const Mat& targets,
                            const Mat& dprojected, ParamVector& grads) const;

  /// Contrastive logit scale 1/tau, log-parameterised and clamped.
  double contrastive_scale(const ParamVector& params) const;
  /// Accumulates d(loss)/d(log scale) given d(loss)/d(scale).
  void contrastive_scale_backward(const ParamVector& params, double dscale,
                                  ParamVector& grads) const;

  /// True for parameters that only see real conditioning features.
  bool is_conditioning_param(int id) const;

 private:
  std::vector<StreamShape> stream_shapes(const ConditioningBundle* bundle) const;

  ModelConfig config_;
  ParamLayout layout_;
  std::vector<int> tok_emb_;  // per level, D x H
  int tok_mask_ = -1, tok_pos_ = -1;
  std::vector<nn::MlpIds> stream_proj_;
  int null_rows_ = -1;  // streams x H
  nn::LinearIds enc_in_;
  int enc_cls_ = -1, enc_pos_ = -1;
  std::vector<nn::BlockIds> enc_blocks_;
  nn::NormIds enc_norm_;
  std::vector<nn::BlockIds> dec_blocks_;
  nn::NormIds dec_norm_;
  nn::LinearIds head_;
  nn::LinearIds aux_proj_;
  int log_scale_ = -1;
  int first_cond_param_ = 0, end_cond_param_ = 0;
};

inline constexpr double kInitTemperature = 0.07;
inline constexpr double kMaxContrastiveScale = 100.0;

}  // namespace maskgrid
