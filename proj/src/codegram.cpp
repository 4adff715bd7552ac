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

#include "maskgrid/codegram.hpp"

#include <cmath>
#include <sstream>

#include "maskgrid/binary_io.hpp"

namespace maskgrid {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'R', 'M'};

void check_mask_shape(int length, int levels, const MaskTensor& mask) {
  require_shape(mask.length() == length,
                "mask length " + std::to_string(mask.length()) + " != codegram length " +
                    std::to_string(length));
  require_shape(mask.levels() == levels,
                "mask levels " + std::to_string(mask.levels()) + " != codegram levels " +
                    std::to_string(levels));
}

}  // namespace

void CodebookSpec::validate() const {
  require_arg(levels >= 1, "codebook levels must be >= 1");
  require_arg(vocab_size >= 2, "codebook vocab_size must be >= 2");
  require_arg(embed_dim >= 1, "codebook embed_dim must be >= 1");
}

MaskTensor::MaskTensor(int length, int levels, bool value)
    : length_(length), levels_(levels),
      flags_(static_cast<std::size_t>(length) * levels, value ? 1 : 0) {
  require_arg(length >= 0 && levels >= 0, "mask dimensions must be non-negative");
}

int MaskTensor::count_masked() const {
  int n = 0;
  for (auto f : flags_) n += f;
  return n;
}

Codegram::Codegram(CodebookSpec spec, int length, std::vector<std::int32_t> tokens)
    : spec_(spec), length_(length), tokens_(std::move(tokens)) {
  spec_.validate();
  require_arg(length_ >= 1, "codegram length must be >= 1");
  require_shape(tokens_.size() == static_cast<std::size_t>(length_) * spec_.levels,
                "codegram token count " + std::to_string(tokens_.size()) + " != L*K = " +
                    std::to_string(static_cast<std::size_t>(length_) * spec_.levels));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] < 0 || tokens_[i] >= spec_.vocab_size) {
      throw TokenRangeError("token " + std::to_string(tokens_[i]) + " at flat index " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(spec_.vocab_size) + ")");
    }
  }
}

Codegram Codegram::filled(CodebookSpec spec, int length, std::int32_t value) {
  return Codegram(spec, length,
                  std::vector<std::int32_t>(static_cast<std::size_t>(length) * spec.levels, value));
}

EmbeddingTable EmbeddingTable::random(const CodebookSpec& spec, int null_streams, Rng& rng) {
  spec.validate();
  EmbeddingTable t;
  t.spec = spec;
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.embed_dim));
  auto fill = [&](Mat& m, int rows) {
    m.resize(rows, spec.embed_dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  };
  t.levels.resize(spec.levels);
  for (auto& level : t.levels) fill(level, spec.vocab_size);
  fill(t.mask_rows, spec.levels);
  fill(t.null_rows, null_streams);
  return t;
}

EmbeddingView EmbeddingTable::view() const {
  EmbeddingView v;
  v.vocab_size = spec.vocab_size;
  v.embed_dim = spec.embed_dim;
  for (const auto& level : levels) v.levels.push_back(level.data());
  v.mask_rows = mask_rows.data();
  return v;
}

void embed_sum_into(std::span<const std::int32_t> tokens, int length, int levels,
                    const MaskTensor& mask, const EmbeddingView& view, Mat& out) {
  check_mask_shape(length, levels, mask);
  require_shape(static_cast<int>(view.levels.size()) == levels,
                "embedding table has " + std::to_string(view.levels.size()) +
                    " levels, codegram has " + std::to_string(levels));
  const int e = view.embed_dim;
  out.setZero(length, e);
  for (int l = 0; l < length; ++l) {
    double* row = out.data() + static_cast<std::size_t>(l) * e;
    for (int k = 0; k < levels; ++k) {
      const std::size_t flat = static_cast<std::size_t>(l) * levels + k;
      const double* src;
      if (mask.flat(flat)) {
        src = view.mask_rows + static_cast<std::size_t>(k) * e;
      } else {
        const std::int32_t t = tokens[flat];
        if (t < 0 || t >= view.vocab_size)
          throw TokenRangeError("unmasked token " + std::to_string(t) + " outside vocabulary");
        src = view.levels[k] + static_cast<std::size_t>(t) * e;
      }
      for (int j = 0; j < e; ++j) row[j] += src[j];
    }
  }
}

Mat embed_sum(const Codegram& codegram, const MaskTensor& mask, const EmbeddingTable& table) {
  require_shape(table.spec.same_grid(codegram.spec()),
                "embedding table spec (K=" + std::to_string(table.spec.levels) +
                    ", D=" + std::to_string(table.spec.vocab_size) +
                    ") does not match codegram spec (K=" +
                    std::to_string(codegram.spec().levels) +
                    ", D=" + std::to_string(codegram.spec().vocab_size) + ")");
  Mat out;
  embed_sum_into(codegram.tokens(), codegram.length(), codegram.levels(), mask, table.view(), out);
  return out;
}

MaskedCodegram apply_mask(const Codegram& codegram, const MaskTensor& mask) {
  check_mask_shape(codegram.length(), codegram.levels(), mask);
  MaskedCodegram m{codegram.spec(), codegram.length(),
                   std::vector<std::int32_t>(codegram.tokens().begin(), codegram.tokens().end())};
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    if (mask.flat(i)) m.tokens[i] = codegram.spec().mask_token();
  }
  return m;
}

Codegram unmask_with(const MaskedCodegram& masked, const Codegram& original) {
  require_shape(masked.length == original.length() && masked.spec.same_grid(original.spec()),
                "masked codegram shape does not match original");
  std::vector<std::int32_t> tokens = masked.tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == masked.spec.mask_token()) tokens[i] = original.tokens()[i];
  }
  return Codegram(original.spec(), original.length(), std::move(tokens));
}

std::string encode_codegram(const Codegram& codegram) {
  std::string out(kMagic, 4);
  io::put_u32(out, kCodegramVersion);
  io::put_u32(out, static_cast<std::uint32_t>(codegram.length()));
  io::put_u32(out, static_cast<std::uint32_t>(codegram.levels()));
  io::put_u32(out, static_cast<std::uint32_t>(codegram.spec().vocab_size));
  io::put_f64(out, codegram.spec().frame_rate);
  for (std::int32_t t : codegram.tokens()) io::put_u32(out, static_cast<std::uint32_t>(t));
  return out;
}

Codegram decode_codegram(const std::string& bytes) {
  io::Reader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw CorruptHeaderError("bad codegram magic");
  const std::uint32_t version = r.u32();
  if (version != kCodegramVersion)
    throw CorruptHeaderError("unsupported codegram version " + std::to_string(version));
  const std::uint32_t length = r.u32();
  const std::uint32_t levels = r.u32();
  const std::uint32_t vocab = r.u32();
  const double frame_rate = r.f64();
  if (length == 0 || levels == 0 || vocab < 2 || length > (1u << 24) || levels > 4096 ||
      vocab > (1u << 30) || !std::isfinite(frame_rate)) {
    throw CorruptHeaderError("implausible codegram header (L=" + std::to_string(length) +
                             ", K=" + std::to_string(levels) + ", D=" + std::to_string(vocab) + ")");
  }
  const std::size_t count = static_cast<std::size_t>(length) * levels;
  if (r.remaining() < count * 4) throw TruncatedPayloadError("codegram payload truncated");
  std::vector<std::int32_t> tokens(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t t = r.u32();
    if (t >= vocab)
      throw TokenRangeError("token " + std::to_string(t) + " at flat index " + std::to_string(i) +
                            " outside [0, " + std::to_string(vocab) + ")");
    tokens[i] = static_cast<std::int32_t>(t);
  }
  if (r.remaining() != 0) throw CorruptHeaderError("trailing bytes after codegram payload");
  CodebookSpec spec;
  spec.levels = static_cast<int>(levels);
  spec.vocab_size = static_cast<int>(vocab);
  spec.frame_rate = frame_rate;
  return Codegram(spec, static_cast<int>(length), std::move(tokens));
}

void save_codegram(const std::string& path, const Codegram& codegram) {
  io::write_file(path, encode_codegram(codegram));
}

Codegram load_codegram(const std::string& path) { return decode_codegram(io::read_file(path)); }

std::string codegram_to_text(const Codegram& codegram) {
  std::ostringstream os;
  for (int l = 0; l < codegram.length(); ++l) {
    for (int k = 0; k < codegram.levels(); ++k) {
      if (k) os << ' ';
      os << codegram.at(l, k);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace maskgrid
