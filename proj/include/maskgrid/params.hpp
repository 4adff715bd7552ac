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
#include <unordered_map>
#include <vector>

#include "maskgrid/common.hpp"
#include "maskgrid/rng.hpp"

namespace maskgrid {

/// Named tensors packed into one flat buffer. Values, gradients and
/// optimizer moments all share this layout, which keeps the optimizer and
/// the gradient reduction single loops over contiguous memory.
class ParamLayout {
 public:
  struct Entry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
    bool decay = false;  // weight decay applies (matrices of linear maps)
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  int add(const std::string& name, int rows, int cols, bool decay = false);
  const Entry& entry(int id) const { return entries_[id]; }
  const std::vector<Entry>& entries() const { return entries_; }
  int find(const std::string& name) const;  // -1 when absent
  std::size_t size() const { return size_; }

  MatMap map(ParamVector& buf, int id) const {
    const Entry& e = entries_[id];
    return MatMap(buf.data() + e.offset, e.rows, e.cols);
  }
  ConstMatMap map(const ParamVector& buf, int id) const {
    const Entry& e = entries_[id];
    return ConstMatMap(buf.data() + e.offset, e.rows, e.cols);
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
  std::size_t size_ = 0;
};

void fill_uniform(ParamVector& buf, const ParamLayout& layout, int id, double bound, Rng& rng);
void fill_constant(ParamVector& buf, const ParamLayout& layout, int id, double value);

/// First non-finite parameter name, or empty if all are finite.
std::string first_non_finite(const ParamVector& buf, const ParamLayout& layout);

// Checkpoint file: "MGCK" magic, u32 version, u32 record count, then per
// record u32 name length, name bytes, u32 rows, u32 cols and rows*cols
// little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const ParamLayout& layout, const ParamVector& values);
/// Throws FormatError if names or shapes disagree with `layout`.
ParamVector decode_checkpoint(const ParamLayout& layout, const std::string& bytes);

}  // namespace maskgrid
