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

#include "maskgrid/conditioning.hpp"

#include <algorithm>

namespace maskgrid {

namespace {

// ceil(a / b) for b > 0 and any sign of a.
long long ceil_div(long long a, long long b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

}  // namespace

std::vector<int> resample_indices(int n_in, int n_out) {
  require_arg(n_in >= 1, "resample input must have at least one frame");
  require_arg(n_out >= 1, "resample output length must be >= 1");
  std::vector<int> idx(n_out);
  for (int j = 0; j < n_out; ++j) {
    // round-half-down((j + 1/2) * n_in / n_out - 1/2)
    const long long a = (2LL * j + 1) * n_in - 2LL * n_out;
    const long long src = ceil_div(a, 2LL * n_out);
    idx[j] = static_cast<int>(std::clamp<long long>(src, 0, n_in - 1));
  }
  return idx;
}

Mat resample_nn(const Mat& seq, int n_out) {
  require_arg(seq.rows() >= 1, "resample_nn: empty input sequence");
  const auto idx = resample_indices(static_cast<int>(seq.rows()), n_out);
  Mat out(n_out, seq.cols());
  for (int j = 0; j < n_out; ++j) out.row(j) = seq.row(idx[j]);
  return out;
}

std::string role_name(StreamRole role) {
  return role == StreamRole::frame_semantic ? "clip-like" : "s3d-like";
}

StreamRole parse_role(const std::string& name) {
  if (name == "clip-like") return StreamRole::frame_semantic;
  if (name == "s3d-like") return StreamRole::alignment_sensitive;
  throw InvalidArgument("unknown stream role '" + name + "'");
}

void ConditioningBundle::validate() const {
  require_arg(!streams.empty(), "conditioning bundle has no streams");
  for (const auto& s : streams) {
    require_arg(s.features.rows() >= 1 && s.features.cols() >= 1,
                "conditioning stream '" + s.name + "' is empty");
    if (!s.features.allFinite())
      throw NumericError("conditioning stream '" + s.name + "' has non-finite values");
  }
}

ConditioningLayout conditioning_layout(const std::vector<StreamShape>& shapes,
                                       ConditioningPath path, int target_len) {
  require_arg(!shapes.empty(), "conditioning bundle has no streams");
  ConditioningLayout layout;
  std::vector<int> chosen;
  switch (path) {
    case ConditioningPath::adaln:
      for (int i = 0; i < static_cast<int>(shapes.size()); ++i) chosen.push_back(i);
      layout.rows = target_len;
      break;
    case ConditioningPath::seq2seq: {
      int ref = -1;
      for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
        if (shapes[i].role == StreamRole::frame_semantic) {
          ref = i;
          break;
        }
      }
      require_arg(ref >= 0, "seq2seq conditioning requires a clip-like stream");
      for (int i = 0; i < static_cast<int>(shapes.size()); ++i) chosen.push_back(i);
      layout.rows = shapes[ref].frames;
      break;
    }
    case ConditioningPath::hybrid_adaln:
      for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
        if (shapes[i].role == StreamRole::alignment_sensitive) chosen.push_back(i);
      }
      require_arg(!chosen.empty(), "hybrid AdaLN conditioning requires an s3d-like stream");
      layout.rows = target_len;
      break;
  }
  require_arg(layout.rows >= 1, "conditioning target length must be >= 1");
  int offset = 0;
  for (int i : chosen) {
    ConditioningLayout::Part part;
    part.stream = i;
    part.col_offset = offset;
    part.channels = shapes[i].channels;
    part.source_rows = resample_indices(shapes[i].frames, layout.rows);
    offset += shapes[i].channels;
    layout.parts.push_back(std::move(part));
  }
  layout.cols = offset;
  return layout;
}

Mat assemble_conditioning(const std::vector<const Mat*>& streams, const ConditioningLayout& layout) {
  Mat out(layout.rows, layout.cols);
  for (const auto& part : layout.parts) {
    const Mat& src = *streams[part.stream];
    require_shape(src.cols() == part.channels, "conditioning stream width changed");
    for (int r = 0; r < layout.rows; ++r)
      out.row(r).segment(part.col_offset, part.channels) = src.row(part.source_rows[r]);
  }
  return out;
}

void scatter_conditioning(const Mat& d_out, const ConditioningLayout& layout,
                          std::vector<Mat>& d_streams) {
  for (const auto& part : layout.parts) {
    Mat& dst = d_streams[part.stream];
    for (int r = 0; r < layout.rows; ++r)
      dst.row(part.source_rows[r]) += d_out.row(r).segment(part.col_offset, part.channels);
  }
}

Mat build_conditioning(const ConditioningBundle& bundle, ConditioningPath path, int target_len) {
  bundle.validate();
  std::vector<StreamShape> shapes;
  std::vector<const Mat*> mats;
  for (const auto& s : bundle.streams) {
    shapes.push_back({s.role, static_cast<int>(s.features.rows()), static_cast<int>(s.features.cols())});
    mats.push_back(&s.features);
  }
  return assemble_conditioning(mats, conditioning_layout(shapes, path, target_len));
}

}  // namespace maskgrid
