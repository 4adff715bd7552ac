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

#include "maskgrid/params.hpp"

#include <cmath>

#include "maskgrid/binary_io.hpp"

namespace maskgrid {

int ParamLayout::add(const std::string& name, int rows, int cols, bool decay) {
  require_arg(rows >= 1 && cols >= 1, "parameter '" + name + "' must have a positive shape");
  require_arg(!by_name_.contains(name), "duplicate parameter '" + name + "'");
  const int id = static_cast<int>(entries_.size());
  entries_.push_back({name, rows, cols, size_, decay});
  by_name_.emplace(name, id);
  size_ += static_cast<std::size_t>(rows) * cols;
  return id;
}

int ParamLayout::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

void fill_uniform(ParamVector& buf, const ParamLayout& layout, int id, double bound, Rng& rng) {
  const auto& e = layout.entry(id);
  for (std::size_t i = 0; i < e.size(); ++i) buf[e.offset + i] = rng.uniform(-bound, bound);
}

void fill_constant(ParamVector& buf, const ParamLayout& layout, int id, double value) {
  const auto& e = layout.entry(id);
  for (std::size_t i = 0; i < e.size(); ++i) buf[e.offset + i] = value;
}

std::string first_non_finite(const ParamVector& buf, const ParamLayout& layout) {
  for (const auto& e : layout.entries()) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!std::isfinite(buf[e.offset + i])) return e.name;
    }
  }
  return {};
}

std::string encode_checkpoint(const ParamLayout& layout, const ParamVector& values) {
  require_shape(values.size() == layout.size(), "parameter buffer does not match layout");
  std::string out = "MGCK";
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, static_cast<std::uint32_t>(layout.entries().size()));
  for (const auto& e : layout.entries()) {
    io::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    io::put_u32(out, static_cast<std::uint32_t>(e.rows));
    io::put_u32(out, static_cast<std::uint32_t>(e.cols));
    for (std::size_t i = 0; i < e.size(); ++i) io::put_f64(out, values[e.offset + i]);
  }
  return out;
}

ParamVector decode_checkpoint(const ParamLayout& layout, const std::string& bytes) {
  io::Reader r(bytes);
  if (r.bytes(4) != "MGCK") throw CorruptHeaderError("bad checkpoint magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CorruptHeaderError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u32();
  if (count != layout.entries().size())
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, config expects " +
                      std::to_string(layout.entries().size()));
  ParamVector values(layout.size());
  for (const auto& e : layout.entries()) {
    const auto name_len = r.u32();
    if (name_len > 4096) throw CorruptHeaderError("implausible tensor name length");
    const std::string name = r.bytes(name_len);
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (name != e.name || static_cast<int>(rows) != e.rows || static_cast<int>(cols) != e.cols) {
      throw FormatError("checkpoint tensor '" + name + "' [" + std::to_string(rows) + "x" +
                        std::to_string(cols) + "] does not match expected '" + e.name + "' [" +
                        std::to_string(e.rows) + "x" + std::to_string(e.cols) + "]");
    }
    for (std::size_t i = 0; i < e.size(); ++i) values[e.offset + i] = r.f64();
  }
  if (r.remaining() != 0) throw CorruptHeaderError("trailing bytes after checkpoint");
  return values;
}

}  // namespace maskgrid
