// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include <cmath>
#include <vector>

namespace svdd {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return mel * f_sp;
}

inline std::vector<double> fft_bin_frequencies(int sample_rate, int fft_size) {
  const int bins = fft_size / 2 + 1;
  std::vector<double> f(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) f[static_cast<std::size_t>(k)] = static_cast<double>(k) * sample_rate / fft_size;
  return f;
}

namespace detail {

// Triangular filters with corner frequencies edges[i], edges[i+1], edges[i+2].
inline MatrixD triangular_filters(const std::vector<double>& edges, const std::vector<double>& bin_hz,
                                  bool area_normalise) {
  const int n_filters = static_cast<int>(edges.size()) - 2;
  MatrixD fb = MatrixD::Zero(n_filters, static_cast<Eigen::Index>(bin_hz.size()));
  for (int m = 0; m < n_filters; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    const double norm = area_normalise ? 2.0 / (hi - lo) : 1.0;
    for (std::size_t k = 0; k < bin_hz.size(); ++k) {
      const double lower = (bin_hz[k] - lo) / (mid - lo);
      const double upper = (hi - bin_hz[k]) / (hi - mid);
      fb(m, static_cast<Eigen::Index>(k)) = std::max(0.0, std::min(lower, upper)) * norm;
    }
  }
  return fb;
}

}  // namespace detail

// n_mels x (fft_size/2+1) mel filterbank, Slaney scale with area
// normalisation (the convention the encoder front-end was trained with).
inline MatrixD mel_filterbank(int sample_rate, int fft_size, int n_mels, double fmin = 0.0, double fmax = -1.0) {
  if (n_mels < 1) throw ValidationError("n_mels must be positive");
  if (fmax <= 0) fmax = sample_rate / 2.0;
  const double mlo = hz_to_mel(fmin);
  const double mhi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = mel_to_hz(mlo + (mhi - mlo) * i / (n_mels + 1));
  }
  return detail::triangular_filters(edges, fft_bin_frequencies(sample_rate, fft_size), true);
}

// Centre frequencies of the linear filterbank: interior points of
// linspace(0, nyquist, n_filters + 2).
inline std::vector<double> linear_filter_edges(int sample_rate, int n_filters) {
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  const double nyq = sample_rate / 2.0;
  for (int i = 0; i < n_filters + 2; ++i) edges[static_cast<std::size_t>(i)] = nyq * i / (n_filters + 1);
  return edges;
}

// Unit-peak triangular filters spaced linearly in Hz.
inline MatrixD linear_filterbank(int sample_rate, int fft_size, int n_filters) {
  if (n_filters < 1) throw ValidationError("n_filters must be positive");
  return detail::triangular_filters(linear_filter_edges(sample_rate, n_filters),
                                    fft_bin_frequencies(sample_rate, fft_size), false);
}

// power: T x bins, fb: M x bins -> T x M.
inline MatrixD apply_filterbank(const MatrixD& power, const MatrixD& fb) {
  if (power.cols() != fb.cols()) throw ShapeError("filterbank width does not match spectrum bins");
  return power * fb.transpose();
}

// Orthonormal DCT-II as an n x n matrix: y = M x.
inline MatrixD dct2_matrix(int n) {
  MatrixD m(n, n);
  const double s0 = std::sqrt(1.0 / n);
  const double s = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      m(k, i) = (k == 0 ? s0 : s) * std::cos(M_PI * (i + 0.5) * k / n);
    }
  }
  return m;
}

}  // namespace svdd
