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
#include <utility>
#include <vector>

#include "maskgrid/layers.hpp"
#include "maskgrid/params.hpp"

namespace maskgrid {

struct ScavConfig {
  int n_scav = 16;
  int h_scav = 16;
  int video_channels = 8;
  int audio_channels = 8;
  int hidden = 64;
  int audio_groups = 8;  // extra audio axis, mean-reduced before scoring
  double temperature = 0.1;

  void validate() const;
  bool operator==(const ScavConfig&) const = default;
};

struct ScavCache {
  std::vector<int> rows;  // resampling map, N_scav entries
  nn::MlpCache mlp;
};

/// Video and audio sequence encoders sharing one parameter buffer. Each
/// branch resamples its input to N_scav frames and applies a frame-wise MLP;
/// the audio MLP emits audio_groups x H_scav values per frame which are
/// averaged over the group axis.
class Scav {
 public:
  explicit Scav(ScavConfig config);

  const ScavConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  ParamVector init_params(std::uint64_t seed) const;

  Mat encode_video(const ParamVector& params, const Mat& clip_like,
                   ScavCache* cache = nullptr) const;
  Mat encode_audio(const ParamVector& params, const Mat& beats_like,
                   ScavCache* cache = nullptr) const;
  void encode_video_backward(const ParamVector& params, const ScavCache& cache,
                             const Mat& d_out, ParamVector& grads) const;
  void encode_audio_backward(const ParamVector& params, const ScavCache& cache,
                             const Mat& d_out, ParamVector& grads) const;

 private:
  ScavConfig config_;
  ParamLayout layout_;
  nn::MlpIds video_, audio_;
};

/// Mean squared difference over all N_scav x H_scav entries.
double scav_distance(const Mat& e_video, const Mat& e_audio);

struct ScavLossResult {
  double value = 0.0;
  std::vector<Mat> d_video, d_audio;
};
/// Symmetric cross-entropy over logits_ij = -scav_distance(v_i, a_j) / tau.
ScavLossResult scav_contrastive_loss(const std::vector<Mat>& videos, const std::vector<Mat>& audios,
                                     double tau, bool want_grads = false);

struct ScavTrainConfig {
  int steps = 300;
  int batch_size = 32;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Trains in place on (clip-like, beats-like) pairs; returns the loss per step.
std::vector<double> train_scav(const Scav& scav, ParamVector& params,
                               const std::vector<std::pair<Mat, Mat>>& pairs,
                               const ScavTrainConfig& config);

/// Index of the smallest distance, lowest index on ties.
int argmin_distance(const std::vector<double>& distances);

/// Encodes the video once and every candidate in parallel; fills
/// `distances` (one per candidate) when given.
int select_best(const Scav& scav, const ParamVector& params, const Mat& clip_like,
                const std::vector<Mat>& candidates, int threads,
                std::vector<double>* distances = nullptr);

}  // namespace maskgrid
