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

#include "maskgrid/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace maskgrid {

TrainMaskDraw draw_train_mask_at(int length, int levels, double u, Rng& rng) {
  require_arg(length >= 1 && levels >= 1, "mask shape must be at least 1x1");
  require_arg(u >= 0.0 && u <= std::numbers::pi / 2, "u must lie in [0, pi/2]");
  TrainMaskDraw draw;
  // cos(pi/2) is 6e-17 in double; pin the endpoint so p is exactly 0.
  draw.p = u == std::numbers::pi / 2 ? 0.0 : std::cos(u);
  draw.mask = MaskTensor(length, levels);
  for (std::size_t i = 0; i < draw.mask.size(); ++i) draw.mask.set_flat(i, rng.bernoulli(draw.p));
  return draw;
}

TrainMaskDraw draw_train_mask(int length, int levels, Rng& rng) {
  const double u = rng.uniform(0.0, std::numbers::pi / 2);
  return draw_train_mask_at(length, levels, u, rng);
}

double cosine_mask_ratio(double r) { return std::cos(std::numbers::pi / 2 * r); }

SampleSchedule build_sample_schedule(int total, int steps, MaskRatioFn ratio) {
  require_arg(steps >= 1, "n_steps must be >= 1");
  require_arg(total >= 0, "total positions must be >= 0");
  SampleSchedule s;
  s.total_positions = total;
  s.steps = steps;
  s.masked_counts.resize(steps + 1);
  for (int n = 0; n <= steps; ++n) {
    const double r = static_cast<double>(n) / steps;
    const double c = std::ceil(total * ratio(r));
    s.masked_counts[n] = std::clamp(static_cast<int>(c), 0, total);
  }
  s.masked_counts[0] = total;
  s.masked_counts[steps] = 0;
  // Guard monotonicity against a non-monotone ratio function.
  for (int n = 1; n <= steps; ++n)
    s.masked_counts[n] = std::min(s.masked_counts[n], s.masked_counts[n - 1]);
  return s;
}

std::string schedule_to_csv(const SampleSchedule& schedule) {
  std::ostringstream os;
  os << "step,masked_count,kappa\n";
  for (int n = 0; n < schedule.steps; ++n)
    os << n << ',' << schedule.masked_counts[n] << ',' << schedule.kappa(n) << '\n';
  return os.str();
}

}  // namespace maskgrid
