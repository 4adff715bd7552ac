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

#include "maskgrid/common.hpp"

namespace maskgrid {

/// Source index for each output frame of a nearest-neighbour resample.
/// Frames are matched by centre with ties rounded down, so an integer
/// upsampling factor repeats every input frame exactly that many times.
std::vector<int> resample_indices(int n_in, int n_out);

/// Nearest-neighbour length adapter (frame repetition / decimation).
Mat resample_nn(const Mat& seq, int n_out);

enum class StreamRole {
  frame_semantic,       // "clip-like"
  alignment_sensitive,  // "s3d-like"
};

std::string role_name(StreamRole role);
StreamRole parse_role(const std::string& name);

struct ConditioningStream {
  std::string name;
  StreamRole role = StreamRole::frame_semantic;
  Mat features;  // frames x channels
};

struct ConditioningBundle {
  std::vector<ConditioningStream> streams;

  /// Throws on empty bundles, empty streams or non-finite values.
  void validate() const;
};

enum class ConditioningPath {
  adaln,         // every stream resampled to the token length
  seq2seq,       // every stream resampled to the first clip-like stream
  hybrid_adaln,  // only s3d-like streams, resampled to the token length
};

/// Where each stream lands in the concatenated conditioning matrix.
struct ConditioningLayout {
  struct Part {
    int stream = 0;
    int col_offset = 0;
    int channels = 0;
    std::vector<int> source_rows;  // one entry per output row
  };
  int rows = 0;
  int cols = 0;
  std::vector<Part> parts;
};

struct StreamShape {
  StreamRole role;
  int frames;
  int channels;
};

/// target_len is ignored on the seq2seq path, whose length comes from the
/// reference clip-like stream. Throws InvalidArgument when the path's
/// required role is absent.
ConditioningLayout conditioning_layout(const std::vector<StreamShape>& shapes,
                                       ConditioningPath path, int target_len);

Mat build_conditioning(const ConditioningBundle& bundle, ConditioningPath path, int target_len);

/// Applies a layout to already-shaped stream matrices (e.g. projected features).
Mat assemble_conditioning(const std::vector<const Mat*>& streams, const ConditioningLayout& layout);

/// Adjoint of assemble_conditioning: scatter-adds d_out into per-stream grads.
void scatter_conditioning(const Mat& d_out, const ConditioningLayout& layout,
                          std::vector<Mat>& d_streams);

}  // namespace maskgrid
