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

#include "maskgrid/codegram.hpp"
#include "maskgrid/rng.hpp"

namespace maskgrid {

struct TrainMaskDraw {
  double p = 0.0;  // per-position masking probability, cos(u)
  MaskTensor mask;
};

/// u ~ U[0, pi/2], p = cos(u), each flag ~ Bernoulli(p).
TrainMaskDraw draw_train_mask(int length, int levels, Rng& rng);
/// Same draw with u fixed by the caller; rng only feeds the Bernoulli flags.
TrainMaskDraw draw_train_mask_at(int length, int levels, double u, Rng& rng);

/// Fraction of positions still masked at schedule progress r in [0, 1].
/// Must map 0 -> 1 and be non-increasing.
using MaskRatioFn = double (*)(double);
double cosine_mask_ratio(double r);

struct SampleSchedule {
  int total_positions = 0;
  int steps = 0;
  std::vector<int> masked_counts;  // steps + 1 entries, first = total, last = 0

  /// Positions committed during step n (zero-based).
  int kappa(int n) const { return masked_counts[n] - masked_counts[n + 1]; }
};

/// masked_counts[n] = ceil(total * ratio(n / steps)), final count forced to 0.
SampleSchedule build_sample_schedule(int total, int steps,
                                     MaskRatioFn ratio = cosine_mask_ratio);

/// "step,masked_count,kappa" lines, one per step, with a header row.
std::string schedule_to_csv(const SampleSchedule& schedule);

}  // namespace maskgrid
