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

#include "maskgrid/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <vector>

#include "maskgrid/binary_io.hpp"
#include "maskgrid/conditioning.hpp"

namespace maskgrid {

namespace {

double psd_tolerance(const Mat& cov) { return 1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff()); }

}  // namespace

void GaussianStats::validate() const {
  require_shape(cov.rows() == mean.size() && cov.cols() == mean.size(), "covariance/mean size mismatch");
  require_arg(mean.size() >= 1, "empty Gaussian statistics");
  if (!mean.allFinite() || !cov.allFinite()) throw NumericError("non-finite Gaussian statistics");
  const double tol = psd_tolerance(cov);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > tol) throw NumericError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol) throw NumericError("covariance is not positive semi-definite");
}

GaussianStats fit_gaussian(const Mat& x) {
  const Eigen::Index n = x.rows(), d = x.cols();
  require_arg(n >= 2 && d >= 1, "need at least two d>=1 samples for Gaussian statistics");
  Vec mean = Vec::Zero(d);
  Mat m2 = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec xi = x.row(i).transpose();
    const Vec delta = xi - mean;
    mean += delta / static_cast<double>(i + 1);
    m2.noalias() += delta * (xi - mean).transpose();
  }
  GaussianStats s{mean, m2 / static_cast<double>(n - 1)};
  s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
  if (n < d + 1) {
    const double eps = 1e-6 * s.cov.trace() / static_cast<double>(d);
    s.cov.diagonal().array() += eps;
  }
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require_shape(a.mean.size() == b.mean.size(), "Gaussian dimension mismatch");
  a.validate();
  b.validate();
  Eigen::SelfAdjointEigenSolver<Mat> ea(a.cov);
  const Vec sa = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat root_a = ea.eigenvectors() * sa.asDiagonal() * ea.eigenvectors().transpose();
  Mat inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_sqrt = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, fd);
}

int mfcc_frame_count(std::size_t samples, const MfccConfig& c) {
  if (samples < static_cast<std::size_t>(c.window)) return 0;
  return static_cast<int>((samples - c.window) / c.hop) + 1;
}

Vec dct2(const Vec& x) {
  const Eigen::Index n = x.size();
  Vec out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      s += x[i] * std::cos(std::numbers::pi * (i + 0.5) * k / static_cast<double>(n));
    out[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

Mat mel_filter_bank(const MfccConfig& c) {
  const int bins = c.window / 2 + 1;
  const double top = hz_to_mel(c.sample_rate / 2.0);
  std::vector<double> edges(c.n_mels + 2);
  for (int i = 0; i < c.n_mels + 2; ++i) edges[i] = mel_to_hz(top * i / (c.n_mels + 1));
  Mat fb = Mat::Zero(c.n_mels, bins);
  for (int m = 0; m < c.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = b * c.sample_rate / c.window;
      if (f > lo && f < hi) fb(m, b) = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace

EmbeddingSet mfcc_like_frontend(std::span<const double> signal, const MfccConfig& c) {
  require_arg(c.window >= 2 && c.hop >= 1 && c.n_mels >= 1 && c.n_coeffs >= 1 && c.n_coeffs <= c.n_mels,
              "invalid MFCC configuration");
  require_arg(signal.size() >= static_cast<std::size_t>(c.window), "signal shorter than one analysis window");
  const int frames = mfcc_frame_count(signal.size(), c);
  const int bins = c.window / 2 + 1;
  const Mat fb = mel_filter_bank(c);
  std::vector<double> hann(c.window);
  for (int i = 0; i < c.window; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / c.window);

  Eigen::FFT<double> fft;
  std::vector<double> buf(c.window);
  std::vector<std::complex<double>> spec;
  EmbeddingSet out{Mat(frames, c.n_coeffs), "mfcc-like"};
  for (int f = 0; f < frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * c.hop;
    for (int i = 0; i < c.window; ++i) buf[i] = signal[start + i] * hann[i];
    fft.fwd(spec, buf);
    Vec mag(bins);
    for (int b = 0; b < bins; ++b) mag[b] = std::abs(spec[b]);
    const Vec mel = (fb * mag).array().max(0.0).unaryExpr([](double v) { return std::log(v + 1e-10); });
    out.vectors.row(f) = dct2(mel).head(c.n_coeffs).transpose();
  }
  return out;
}

double cosine_semantic(const Vec& a, const Vec& b) {
  require_shape(a.size() == b.size(), "embedding width mismatch");
  const double na = a.norm(), nb = b.norm();
  require_arg(na > 0.0 && nb > 0.0, "cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Vec novelty_curve(const Mat& seq, int kernel_size) {
  require_arg(kernel_size >= 2 && kernel_size % 2 == 0, "novelty kernel size must be even and >= 2");
  require_arg(seq.rows() >= kernel_size, "sequence shorter than the novelty kernel");
  const Eigen::Index n = seq.rows();
  Mat unit = seq;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  const Mat ssm = unit * unit.transpose();

  const int half = kernel_size / 2;
  const double sigma = half / 2.0;
  Mat kernel(kernel_size, kernel_size);
  for (int i = 0; i < kernel_size; ++i) {
    for (int j = 0; j < kernel_size; ++j) {
      const double u = i - half + 0.5, v = j - half + 0.5;
      const double sign = (u < 0) == (v < 0) ? 1.0 : -1.0;
      kernel(i, j) = sign * std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
    }
  }
  Vec curve = Vec::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (int i = 0; i < kernel_size; ++i) {
      const Eigen::Index r = t - half + i;
      if (r < 0 || r >= n) continue;
      for (int j = 0; j < kernel_size; ++j) {
        const Eigen::Index q = t - half + j;
        if (q < 0 || q >= n) continue;
        s += kernel(i, j) * ssm(r, q);
      }
    }
    curve[t] = s;
  }
  return curve;
}

double pearson(const Vec& a, const Vec& b) {
  require_shape(a.size() == b.size() && a.size() >= 1, "pearson inputs differ in length");
  const Vec ca = a.array() - a.mean();
  const Vec cb = b.array() - b.mean();
  const double va = ca.squaredNorm(), vb = cb.squaredNorm();
  if (va == 0.0 || vb == 0.0) {
    std::cerr << "warning: zero-variance novelty curve, correlation defined as 0\n";
    return 0.0;
  }
  return std::clamp(ca.dot(cb) / std::sqrt(va * vb), -1.0, 1.0);
}

double novelty_score(const Mat& generated, const Mat& reference, int kernel_size) {
  Vec g = novelty_curve(generated, kernel_size);
  Vec r = novelty_curve(reference, kernel_size);
  auto stretch = [](const Vec& v, Eigen::Index len) -> Vec {
    const Mat col = v;
    return resample_nn(Mat(col), static_cast<int>(len)).col(0);
  };
  if (g.size() < r.size()) g = stretch(g, r.size());
  else if (r.size() < g.size()) r = stretch(r, g.size());
  return pearson(g, r);
}

namespace {
constexpr char kEmbeddingMagic[4] = {'M', 'G', 'E', 'M'};
}

std::string encode_embeddings(const EmbeddingSet& set) {
  std::string out(kEmbeddingMagic, 4);
  io::put_u32(out, kEmbeddingVersion);
  io::put_u32(out, static_cast<std::uint32_t>(set.vectors.rows()));
  io::put_u32(out, static_cast<std::uint32_t>(set.vectors.cols()));
  io::put_u32(out, static_cast<std::uint32_t>(set.front_end.size()));
  out += set.front_end;
  for (Eigen::Index i = 0; i < set.vectors.size(); ++i) io::put_f32(out, static_cast<float>(set.vectors.data()[i]));
  return out;
}

EmbeddingSet decode_embeddings(const std::string& bytes) {
  io::Reader r(bytes);
  const std::string magic = r.bytes(4);
  if (magic != std::string(kEmbeddingMagic, 4)) throw CorruptHeaderError("bad embedding file magic");
  if (r.u32() != kEmbeddingVersion) throw CorruptHeaderError("unsupported embedding file version");
  const std::uint32_t n = r.u32(), d = r.u32(), name_len = r.u32();
  if (name_len > 4096 || d > (1u << 20)) throw CorruptHeaderError("implausible embedding header");
  EmbeddingSet set;
  set.front_end = r.bytes(name_len);
  if (r.remaining() != static_cast<std::size_t>(n) * d * 4) {
    if (r.remaining() < static_cast<std::size_t>(n) * d * 4) throw TruncatedPayloadError("embedding payload truncated");
    throw CorruptHeaderError("trailing bytes after embedding payload");
  }
  set.vectors.resize(n, d);
  for (Eigen::Index i = 0; i < set.vectors.size(); ++i) set.vectors.data()[i] = r.f32();
  return set;
}

void save_embeddings(const std::string& path, const EmbeddingSet& set) {
  io::write_file(path, encode_embeddings(set));
}

EmbeddingSet load_embeddings(const std::string& path) { return decode_embeddings(io::read_file(path)); }

}  // namespace maskgrid
