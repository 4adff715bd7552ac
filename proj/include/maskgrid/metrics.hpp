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

#include <span>
#include <string>

#include "maskgrid/common.hpp"

namespace maskgrid {

struct EmbeddingSet {
  Mat vectors;  // n x d
  std::string front_end;
};

struct GaussianStats {
  Vec mean;
  Mat cov;

  void validate() const;  // symmetric, PSD within tolerance
};

/// Mean and unbiased covariance from a single streaming pass (Welford).
/// When n < d + 1 the covariance gets 1e-6 * trace/d added on the diagonal.
GaussianStats fit_gaussian(const Mat& samples);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), negative round-off
/// clamped to 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct MfccConfig {
  int window = 2048;
  int hop = 512;
  int n_mels = 128;
  int n_coeffs = 64;
  double sample_rate = 44100.0;
};

int mfcc_frame_count(std::size_t samples, const MfccConfig& config = {});

/// Hann-windowed magnitude spectrum -> triangular mel filter bank -> log ->
/// orthonormal DCT-II, first n_coeffs values per frame.
EmbeddingSet mfcc_like_frontend(std::span<const double> signal, const MfccConfig& config = {});

/// Orthonormal DCT-II of x.
Vec dct2(const Vec& x);

double cosine_semantic(const Vec& a, const Vec& b);

/// Foote novelty: cosine self-similarity matrix correlated along its main
/// diagonal with a Gaussian-tapered checkerboard kernel of even size.
Vec novelty_curve(const Mat& seq, int kernel_size = 16);

/// Pearson correlation; a zero-variance input yields 0 and a warning on stderr.
double pearson(const Vec& a, const Vec& b);

double novelty_score(const Mat& generated, const Mat& reference, int kernel_size = 16);

inline constexpr std::uint32_t kEmbeddingVersion = 1;
std::string encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(const std::string& bytes);
void save_embeddings(const std::string& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::string& path);

}  // namespace maskgrid
