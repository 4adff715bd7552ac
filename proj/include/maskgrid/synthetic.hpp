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
#include <string>
#include <vector>

#include "maskgrid/codegram.hpp"
#include "maskgrid/conditioning.hpp"
#include "maskgrid/model.hpp"
#include "maskgrid/trainer.hpp"

namespace maskgrid {

enum class TaskRule { deterministic_map, noisy_map, event_onsets };
std::string rule_name(TaskRule rule);
TaskRule parse_rule(const std::string& name);

struct SyntheticTaskSpec {
  TaskRule rule = TaskRule::deterministic_map;
  int length = 32;
  int levels = 4;
  int vocab = 64;
  int symbols = 8;        // size of the visual "alphabet"
  int clip_frames = 32;   // frame-semantic stream
  int clip_channels = 16;
  int s3d_channels = 8;   // fine stream, one frame per token step
  int beats_channels = 8;
  int phase_period = 4;   // token steps sharing one hash phase
  double noise = 0.3;     // noisy-map: chance of the alternate map per example
  std::uint64_t seed = 0;

  void validate() const;
  CodebookSpec codebook() const { return CodebookSpec{levels, vocab, 8, 86.1}; }
  bool operator==(const SyntheticTaskSpec&) const = default;
};

struct SyntheticExample {
  Codegram codegram;
  Codegram clean;  // the deterministic-map answer for the same conditioning
  ConditioningBundle bundle;
  Mat beats;       // beats-like features of `codegram`
};

/// Seeded generator of paired conditioning/codegram data.
///
/// deterministic-map: a clip-like stream shows one symbol per coarse frame;
/// token[l,k] is a seeded hash of (k, symbol under step l, l mod period).
/// noisy-map: the same, except that with probability `noise` the whole
/// codegram uses a second hash. event-onsets: an s3d-like impulse marks each
/// segment start and tokens stay constant within a segment.
class SyntheticTask {
 public:
  explicit SyntheticTask(SyntheticTaskSpec spec);

  const SyntheticTaskSpec& spec() const { return spec_; }
  std::vector<StreamSpec> stream_specs() const;
  SyntheticExample make(std::uint64_t index) const;

  /// Deterministic "audio" features of a codegram: per step, the sum over
  /// levels of fixed random token vectors.
  Mat beats_features(const Codegram& codegram) const;
  /// Toy waveform: 512 samples per token step, one sinusoid per level with
  /// a token-dependent frequency.
  std::vector<double> render(const Codegram& codegram) const;

 private:
  std::int32_t hash_token(std::uint64_t map, int k, int symbol, int phase) const;

  SyntheticTaskSpec spec_;
  Mat clip_protos_;   // symbols x clip_channels
  Mat s3d_protos_;    // symbols x s3d_channels
  std::vector<Mat> beat_vectors_;  // per level, vocab x beats_channels
};

inline TrainExample to_train_example(SyntheticExample ex) {
  return TrainExample{std::move(ex.codegram), std::move(ex.bundle), std::move(ex.beats)};
}

}  // namespace maskgrid
