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

#include "maskgrid/selector.hpp"

#include <cmath>

#include "maskgrid/conditioning.hpp"
#include "maskgrid/losses.hpp"
#include "maskgrid/parallel.hpp"
#include "maskgrid/rng.hpp"
#include "maskgrid/trainer.hpp"

namespace maskgrid {

void ScavConfig::validate() const {
  require_arg(n_scav >= 1 && h_scav >= 1, "N_scav and H_scav must be >= 1");
  require_arg(video_channels >= 1 && audio_channels >= 1 && hidden >= 1 && audio_groups >= 1,
              "SCAV widths must be >= 1");
  require_arg(temperature > 0.0, "SCAV temperature must be > 0");
}

Scav::Scav(ScavConfig config) : config_(config) {
  config_.validate();
  video_ = nn::add_mlp(layout_, "scav.video", config_.video_channels, config_.hidden, config_.h_scav);
  audio_ = nn::add_mlp(layout_, "scav.audio", config_.audio_channels, config_.hidden,
                       config_.audio_groups * config_.h_scav);
}

ParamVector Scav::init_params(std::uint64_t seed) const {
  ParamVector p(layout_.size(), 0.0);
  Rng rng(derive_seed(seed, "scav.init"));
  nn::init_mlp(p, layout_, video_, rng);
  nn::init_mlp(p, layout_, audio_, rng);
  return p;
}

namespace {

Mat gather(const Mat& x, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

}  // namespace

Mat Scav::encode_video(const ParamVector& params, const Mat& x, ScavCache* cache) const {
  require_arg(x.rows() >= 1, "empty video feature sequence");
  require_shape(x.cols() == config_.video_channels, "video feature width mismatch");
  ScavCache local;
  ScavCache& c = cache ? *cache : local;
  c.rows = resample_indices(static_cast<int>(x.rows()), config_.n_scav);
  return nn::mlp(nn::ParamCtx{layout_, params, nullptr}, video_, gather(x, c.rows), c.mlp);
}

Mat Scav::encode_audio(const ParamVector& params, const Mat& x, ScavCache* cache) const {
  require_arg(x.rows() >= 1, "empty audio feature sequence");
  require_shape(x.cols() == config_.audio_channels, "audio feature width mismatch");
  ScavCache local;
  ScavCache& c = cache ? *cache : local;
  c.rows = resample_indices(static_cast<int>(x.rows()), config_.n_scav);
  const Mat wide = nn::mlp(nn::ParamCtx{layout_, params, nullptr}, audio_, gather(x, c.rows), c.mlp);
  const int h = config_.h_scav;
  Mat out = Mat::Zero(wide.rows(), h);
  for (int g = 0; g < config_.audio_groups; ++g) out += wide.middleCols(g * h, h);
  return out / static_cast<double>(config_.audio_groups);
}

void Scav::encode_video_backward(const ParamVector& params, const ScavCache& cache,
                                 const Mat& d_out, ParamVector& grads) const {
  nn::mlp_backward(nn::ParamCtx{layout_, params, &grads}, video_, cache.mlp, d_out);
}

void Scav::encode_audio_backward(const ParamVector& params, const ScavCache& cache,
                                 const Mat& d_out, ParamVector& grads) const {
  const int h = config_.h_scav;
  Mat d_wide(d_out.rows(), config_.audio_groups * h);
  for (int g = 0; g < config_.audio_groups; ++g)
    d_wide.middleCols(g * h, h) = d_out / static_cast<double>(config_.audio_groups);
  nn::mlp_backward(nn::ParamCtx{layout_, params, &grads}, audio_, cache.mlp, d_wide);
}

double scav_distance(const Mat& a, const Mat& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "SCAV sequences differ in shape");
  require_arg(a.size() > 0, "empty SCAV sequence");
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

ScavLossResult scav_contrastive_loss(const std::vector<Mat>& videos, const std::vector<Mat>& audios,
                                     double tau, bool want_grads) {
  const std::size_t b = videos.size();
  require_arg(b >= 2, "contrastive loss needs a batch of at least 2");
  require_shape(audios.size() == b, "video/audio batch sizes differ");
  require_arg(tau > 0.0, "temperature must be > 0");
  Mat logits(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) logits(i, j) = -scav_distance(videos[i], audios[j]) / tau;
  const ContrastiveResult ce = symmetric_ce(logits, want_grads);
  ScavLossResult r;
  r.value = ce.value;
  if (!want_grads) return r;
  r.d_video.resize(b);
  r.d_audio.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    r.d_video[i] = Mat::Zero(videos[i].rows(), videos[i].cols());
    r.d_audio[i] = Mat::Zero(audios[i].rows(), audios[i].cols());
  }
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double d_dist = -ce.d_logits(i, j) / tau;
      const Mat diff = (videos[i] - audios[j]) * (2.0 * d_dist / static_cast<double>(videos[i].size()));
      r.d_video[i] += diff;
      r.d_audio[j] -= diff;
    }
  }
  return r;
}

std::vector<double> train_scav(const Scav& scav, ParamVector& params,
                               const std::vector<std::pair<Mat, Mat>>& pairs,
                               const ScavTrainConfig& config) {
  require_arg(pairs.size() >= 2, "SCAV training needs at least 2 pairs");
  const std::size_t bs = std::min<std::size_t>(std::max(config.batch_size, 2), pairs.size());
  TrainConfig opt;
  opt.weight_decay = config.weight_decay;
  OptimizerState state;
  Rng rng(derive_seed(config.seed, "scav.train"));
  std::vector<double> losses;
  for (int step = 0; step < config.steps; ++step) {
    // Sample a batch without replacement (partial Fisher-Yates).
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < bs; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);

    std::vector<Mat> ev(bs), ea(bs);
    std::vector<ScavCache> cv(bs), ca(bs);
    parallel_for(bs, config.threads, [&](std::size_t i) {
      ev[i] = scav.encode_video(params, pairs[idx[i]].first, &cv[i]);
      ea[i] = scav.encode_audio(params, pairs[idx[i]].second, &ca[i]);
    });
    const ScavLossResult loss = scav_contrastive_loss(ev, ea, scav.config().temperature, true);
    if (!std::isfinite(loss.value)) throw NumericError("non-finite SCAV contrastive loss");
    losses.push_back(loss.value);

    std::vector<ParamVector> per(bs);
    parallel_for(bs, config.threads, [&](std::size_t i) {
      per[i].assign(params.size(), 0.0);
      scav.encode_video_backward(params, cv[i], loss.d_video[i], per[i]);
      scav.encode_audio_backward(params, ca[i], loss.d_audio[i], per[i]);
    });
    ParamVector grads(params.size(), 0.0);
    for (const auto& g : per)
      for (std::size_t j = 0; j < grads.size(); ++j) grads[j] += g[j];
    adamw_update(params, grads, state, scav.layout(), opt, config.lr);
    ++state.step;
  }
  return losses;
}

int argmin_distance(const std::vector<double>& distances) {
  require_arg(!distances.empty(), "empty candidate list");
  int best = 0;
  for (std::size_t i = 1; i < distances.size(); ++i)
    if (distances[i] < distances[best]) best = static_cast<int>(i);
  return best;
}

int select_best(const Scav& scav, const ParamVector& params, const Mat& clip_like,
                const std::vector<Mat>& candidates, int threads, std::vector<double>* distances) {
  require_arg(!candidates.empty(), "empty candidate list");
  const Mat ev = scav.encode_video(params, clip_like);
  std::vector<double> d(candidates.size());
  parallel_for(candidates.size(), threads,
               [&](std::size_t i) { d[i] = scav_distance(ev, scav.encode_audio(params, candidates[i])); });
  const int best = argmin_distance(d);
  if (distances) *distances = std::move(d);
  return best;
}

}  // namespace maskgrid
