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

#include "maskgrid/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "maskgrid/rng.hpp"

namespace maskgrid {

std::string rule_name(TaskRule r) {
  switch (r) {
    case TaskRule::deterministic_map: return "deterministic-map";
    case TaskRule::noisy_map: return "noisy-map";
    case TaskRule::event_onsets: return "event-onsets";
  }
  return "?";
}

TaskRule parse_rule(const std::string& name) {
  for (auto r : {TaskRule::deterministic_map, TaskRule::noisy_map, TaskRule::event_onsets})
    if (rule_name(r) == name) return r;
  throw InvalidArgument("unknown task rule: " + name);
}

void SyntheticTaskSpec::validate() const {
  codebook().validate();
  require_arg(length >= 1 && symbols >= 1 && clip_frames >= 1, "task sizes must be >= 1");
  require_arg(clip_channels >= 1 && s3d_channels >= 2 && beats_channels >= 1, "task widths too small");
  require_arg(phase_period >= 1, "phase period must be >= 1");
  require_arg(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
}

namespace {

// Values are kept float-representable so in-memory examples equal the
// f32 feature files written for them.
double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Mat random_rows(int rows, int cols, Rng& rng, double scale) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32(scale * rng.normal());
  return m;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace

SyntheticTask::SyntheticTask(SyntheticTaskSpec spec) : spec_(spec) {
  spec_.validate();
  Rng rng(derive_seed(spec_.seed, "task.protos"));
  clip_protos_ = random_rows(spec_.symbols, spec_.clip_channels, rng, 1.0);
  s3d_protos_ = random_rows(spec_.symbols, spec_.s3d_channels, rng, 1.0);
  for (int k = 0; k < spec_.levels; ++k)
    beat_vectors_.push_back(random_rows(spec_.vocab, spec_.beats_channels, rng, 1.0 / std::sqrt(spec_.levels)));
}

std::vector<StreamSpec> SyntheticTask::stream_specs() const {
  return {{"clip", StreamRole::frame_semantic, spec_.clip_channels, spec_.clip_frames},
          {"s3d", StreamRole::alignment_sensitive, spec_.s3d_channels, spec_.length}};
}

std::int32_t SyntheticTask::hash_token(std::uint64_t map, int k, int symbol, int phase) const {
  std::uint64_t h = mix(spec_.seed, map);
  h = mix(h, static_cast<std::uint64_t>(k));
  h = mix(h, static_cast<std::uint64_t>(symbol));
  h = mix(h, static_cast<std::uint64_t>(phase));
  return static_cast<std::int32_t>(h % static_cast<std::uint64_t>(spec_.vocab));
}

SyntheticExample SyntheticTask::make(std::uint64_t index) const {
  Rng rng(derive_seed(spec_.seed, "task.example", index));
  const int L = spec_.length, K = spec_.levels, F = spec_.clip_frames;

  // Symbol under each token step, plus the phase used by the hash.
  std::vector<int> step_symbol(L), step_phase(L);
  std::vector<int> frame_symbol(F);
  Mat s3d = Mat::Zero(L, spec_.s3d_channels);
  if (spec_.rule == TaskRule::event_onsets) {
    // Segments start at onsets; step 0 always starts one.
    std::vector<bool> onset(L, false);
    onset[0] = true;
    for (int l = 1; l < L; ++l) onset[l] = rng.bernoulli(0.15);
    int symbol = static_cast<int>(rng.below(spec_.symbols));
    for (int l = 0; l < L; ++l) {
      if (l > 0 && onset[l]) {
        int next = static_cast<int>(rng.below(spec_.symbols - 1));
        symbol = spec_.symbols > 1 ? (next >= symbol ? next + 1 : next) : symbol;
      }
      step_symbol[l] = symbol;
      step_phase[l] = 0;
      s3d(l, 0) = onset[l] ? 1.0 : 0.0;
    }
    for (int f = 0; f < F; ++f) frame_symbol[f] = step_symbol[(2 * f + 1) * L / (2 * F)];
  } else {
    for (int f = 0; f < F; ++f) frame_symbol[f] = static_cast<int>(rng.below(spec_.symbols));
    for (int l = 0; l < L; ++l) {
      step_symbol[l] = frame_symbol[static_cast<std::size_t>(l) * F / L];
      step_phase[l] = l % spec_.phase_period;
    }
  }
  for (int l = 0; l < L; ++l) {
    if (spec_.rule == TaskRule::event_onsets) {
      s3d.row(l).tail(spec_.s3d_channels - 1) = s3d_protos_.row(step_symbol[l]).tail(spec_.s3d_channels - 1);
    } else {
      s3d.row(l) = s3d_protos_.row(step_symbol[l]);
      s3d(l, 0) = f32(static_cast<double>(step_phase[l]) / spec_.phase_period);
    }
  }
  Mat clip(F, spec_.clip_channels);
  for (int f = 0; f < F; ++f) clip.row(f) = clip_protos_.row(frame_symbol[f]);

  const bool alternate = spec_.rule == TaskRule::noisy_map && rng.bernoulli(spec_.noise);
  std::vector<std::int32_t> clean(static_cast<std::size_t>(L) * K), used(clean.size());
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const std::size_t i = static_cast<std::size_t>(l) * K + k;
      clean[i] = hash_token(0, k, step_symbol[l], step_phase[l]);
      used[i] = alternate ? hash_token(1, k, step_symbol[l], step_phase[l]) : clean[i];
    }
  }
  SyntheticExample ex;
  ex.codegram = Codegram(spec_.codebook(), L, std::move(used));
  ex.clean = Codegram(spec_.codebook(), L, std::move(clean));
  ex.bundle.streams = {{"clip", StreamRole::frame_semantic, std::move(clip)},
                       {"s3d", StreamRole::alignment_sensitive, std::move(s3d)}};
  ex.beats = beats_features(ex.codegram);
  return ex;
}

Mat SyntheticTask::beats_features(const Codegram& cg) const {
  require_arg(cg.spec().same_grid(spec_.codebook()), "codegram does not match the task codebook");
  Mat out = Mat::Zero(cg.length(), spec_.beats_channels);
  for (int l = 0; l < cg.length(); ++l)
    for (int k = 0; k < cg.levels(); ++k) out.row(l) += beat_vectors_[k].row(cg.at(l, k));
  return out.unaryExpr([](double v) { return f32(v); });
}

std::vector<double> SyntheticTask::render(const Codegram& cg) const {
  constexpr int kHop = 512;
  constexpr double kRate = 44100.0;
  std::vector<double> out(static_cast<std::size_t>(cg.length()) * kHop, 0.0);
  for (int l = 0; l < cg.length(); ++l) {
    for (int k = 0; k < cg.levels(); ++k) {
      // Level k occupies its own octave band; the token picks the pitch.
      const double freq = 110.0 * std::pow(2.0, k + static_cast<double>(cg.at(l, k)) / spec_.vocab);
      const double amp = std::pow(0.5, k);
      for (int i = 0; i < kHop; ++i) {
        const double t = static_cast<double>(static_cast<std::size_t>(l) * kHop + i) / kRate;
        out[static_cast<std::size_t>(l) * kHop + i] += amp * std::sin(2.0 * std::numbers::pi * freq * t);
      }
    }
  }
  return out;
}

}  // namespace maskgrid
