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
#include <span>
#include <string>
#include <vector>

#include "maskgrid/common.hpp"
#include "maskgrid/rng.hpp"

namespace maskgrid {

/// Shape of the residual token grid: K levels of D codewords each.
struct CodebookSpec {
  int levels = 9;
  int vocab_size = 1024;
  int embed_dim = 8;
  double frame_rate = 86.1;  // informational

  void validate() const;
  /// Token id reserved for masked positions (one past the vocabulary).
  int mask_token() const { return vocab_size; }
  /// Same grid geometry; embed_dim and frame_rate are not compared.
  bool same_grid(const CodebookSpec& other) const {
    return levels == other.levels && vocab_size == other.vocab_size;
  }
  bool operator==(const CodebookSpec&) const = default;
};

/// Binary L x K grid; true marks a masked position.
class MaskTensor {
 public:
  MaskTensor() = default;
  MaskTensor(int length, int levels, bool value = false);

  int length() const { return length_; }
  int levels() const { return levels_; }
  bool at(int l, int k) const { return flags_[index(l, k)] != 0; }
  void set(int l, int k, bool v) { flags_[index(l, k)] = v ? 1 : 0; }
  bool flat(std::size_t i) const { return flags_[i] != 0; }
  void set_flat(std::size_t i, bool v) { flags_[i] = v ? 1 : 0; }
  std::size_t size() const { return flags_.size(); }
  int count_masked() const;
  bool operator==(const MaskTensor&) const = default;

 private:
  std::size_t index(int l, int k) const { return static_cast<std::size_t>(l) * levels_ + k; }

  int length_ = 0;
  int levels_ = 0;
  std::vector<std::uint8_t> flags_;
};

/// L x K grid of codeword indices, every entry in [0, D).
class Codegram {
 public:
  Codegram() = default;
  /// Throws TokenRangeError on an out-of-range token, ShapeError on a size
  /// mismatch.
  Codegram(CodebookSpec spec, int length, std::vector<std::int32_t> tokens);
  static Codegram filled(CodebookSpec spec, int length, std::int32_t value);

  const CodebookSpec& spec() const { return spec_; }
  int length() const { return length_; }
  int levels() const { return spec_.levels; }
  std::int32_t at(int l, int k) const { return tokens_[static_cast<std::size_t>(l) * spec_.levels + k]; }
  std::span<const std::int32_t> tokens() const { return tokens_; }
  bool operator==(const Codegram& o) const {
    return spec_.same_grid(o.spec_) && length_ == o.length_ && tokens_ == o.tokens_;
  }

 private:
  CodebookSpec spec_;
  int length_ = 0;
  std::vector<std::int32_t> tokens_;
};

/// Codegram whose masked entries hold the sentinel spec.mask_token().
struct MaskedCodegram {
  CodebookSpec spec;
  int length = 0;
  std::vector<std::int32_t> tokens;

  std::int32_t at(int l, int k) const { return tokens[static_cast<std::size_t>(l) * spec.levels + k]; }
};

/// Raw pointers into per-level D x E tables plus the K x E mask rows.
/// Used by the model to embed straight out of its parameter buffer.
struct EmbeddingView {
  int vocab_size = 0;
  int embed_dim = 0;
  std::vector<const double*> levels;  // one D x E row-major table per level
  const double* mask_rows = nullptr;  // K x E
};

/// Per-level codeword embeddings with learnable MASK rows and one NULL
/// conditioning row per conditioning stream.
struct EmbeddingTable {
  CodebookSpec spec;
  std::vector<Mat> levels;  // K tables, D x embed_dim
  Mat mask_rows;            // K x embed_dim
  Mat null_rows;            // streams x embed_dim

  /// Uniform init in [-1/sqrt(E), 1/sqrt(E)].
  static EmbeddingTable random(const CodebookSpec& spec, int null_streams, Rng& rng);
  EmbeddingView view() const;
};

/// out[l] = sum_k (mask[l,k] ? mask_row_k : level_k[tokens[l,k]]).
/// Tokens at masked positions are never read, so a sentinel is fine there.
Mat embed_sum(const Codegram& codegram, const MaskTensor& mask, const EmbeddingTable& table);
void embed_sum_into(std::span<const std::int32_t> tokens, int length, int levels,
                    const MaskTensor& mask, const EmbeddingView& view, Mat& out);

MaskedCodegram apply_mask(const Codegram& codegram, const MaskTensor& mask);
/// Fills sentinel positions from `original`; inverse of apply_mask.
Codegram unmask_with(const MaskedCodegram& masked, const Codegram& original);

// Binary file: "CGRM" magic, u32 version, u32 L, u32 K, u32 D, f64 frame
// rate, then L*K little-endian u32 tokens in row-major order.
inline constexpr std::uint32_t kCodegramVersion = 1;
std::string encode_codegram(const Codegram& codegram);
Codegram decode_codegram(const std::string& bytes);
void save_codegram(const std::string& path, const Codegram& codegram);
Codegram load_codegram(const std::string& path);

/// One line per time-step with K space-separated tokens.
std::string codegram_to_text(const Codegram& codegram);

}  // namespace maskgrid
