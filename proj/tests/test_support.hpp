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

#include <vector>

#include "maskgrid/model.hpp"
#include "maskgrid/rng.hpp"
#include "maskgrid/trainer.hpp"

namespace maskgrid::testing {

inline ModelConfig tiny_config(Structure s) {
  ModelConfig c;
  c.structure = s;
  c.spec = CodebookSpec{2, 5, 4, 86.1};
  c.hidden = 8;
  c.heads = 2;
  c.depth = 1;
  c.encoder_depth = 1;
  c.mlp_ratio = 2;
  c.max_len = 6;
  c.max_cond_len = 8;
  c.streams = {{"clip", StreamRole::frame_semantic, 3, 4}, {"s3d", StreamRole::alignment_sensitive, 2, 6}};
  c.aux_channels = 3;
  return c;
}

inline Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline Codegram random_codegram(const CodebookSpec& spec, int length, Rng& rng) {
  std::vector<std::int32_t> t(static_cast<std::size_t>(length) * spec.levels);
  for (auto& v : t) v = static_cast<std::int32_t>(rng.below(spec.vocab_size));
  return Codegram(spec, length, std::move(t));
}

inline ConditioningBundle random_bundle(const ModelConfig& c, Rng& rng, int frame_shift = 0) {
  ConditioningBundle b;
  for (const auto& s : c.streams)
    b.streams.push_back({s.name, s.role, random_mat(s.frames + frame_shift, s.channels, rng)});
  return b;
}

inline TrainExample random_example(const ModelConfig& c, int length, Rng& rng) {
  TrainExample ex{random_codegram(c.spec, length, rng), random_bundle(c, rng), Mat()};
  if (c.aux_channels > 0) ex.aux_targets = random_mat(5, c.aux_channels, rng);
  return ex;
}

inline MaskTensor random_mask(int length, int levels, Rng& rng, double p = 0.5) {
  MaskTensor m(length, levels);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_flat(i, rng.bernoulli(p));
  m.set_flat(0, true);
  return m;
}

}  // namespace maskgrid::testing
