// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/fft.hpp"
#include "svdd/features/filterbank.hpp"
#include "svdd/features/types.hpp"

#include <cmath>
#include <complex>
#include <vector>

namespace svdd {

struct CqtConfig {
  int bins_per_octave = 24;
  double fmin = 62.5;
  double fmax = 8000.0;
  int hop_length = 160;
  // Spectral-kernel entries below this fraction of the kernel's peak
  // magnitude are dropped.
  double sparsity = 1e-3;

  double q() const { return 1.0 / (std::pow(2.0, 1.0 / bins_per_octave) - 1.0); }

  int n_bins() const {
    return static_cast<int>(std::ceil(bins_per_octave * std::log2(fmax / fmin) - 1e-9));
  }

  double bin_frequency(int k) const { return fmin * std::pow(2.0, static_cast<double>(k) / bins_per_octave); }

  // Analysis window length (samples) of bin k.
  int window_length(int k, int sample_rate) const {
    return static_cast<int>(std::ceil(q() * sample_rate / bin_frequency(k)));
  }

  void require_valid(int sample_rate) const {
    if (bins_per_octave < 1) throw ValidationError("cqt: bins_per_octave must be positive");
    if (!(fmin > 0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
      throw ValidationError("cqt: requires 0 < fmin < fmax <= nyquist");
    }
    if (hop_length < 1) throw ValidationError("cqt: hop_length must be positive");
  }
};

// Time-domain atom of bin k: Hann-windowed complex exponential at the bin's
// centre frequency, normalised by its length. Sample n of the atom is
// aligned with input sample (frame_centre - len/2 + n).
inline std::vector<std::complex<double>> cqt_atom(const CqtConfig& cfg, int k, int sample_rate) {
  const int len = cfg.window_length(k, sample_rate);
  const double f = cfg.bin_frequency(k);
  std::vector<std::complex<double>> atom(static_cast<std::size_t>(len));
  for (int n = 0; n < len; ++n) {
    const double win = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / len);
    atom[static_cast<std::size_t>(n)] = std::polar(win / len, 2.0 * M_PI * f * n / sample_rate);
  }
  return atom;
}

// Constant-Q transform computed frame by frame in the frequency domain with a
// precomputed sparse kernel (the conjugate spectra of the time-domain atoms).
class ConstantQTransform {
 public:
  ConstantQTransform(const CqtConfig& cfg, int sample_rate) : cfg_(cfg), sample_rate_(sample_rate) {
    cfg_.require_valid(sample_rate);
    const int longest = cfg_.window_length(0, sample_rate);
    fft_size_ = 1;
    while (fft_size_ < longest) fft_size_ *= 2;
    build_kernel();
  }

  int n_bins() const { return static_cast<int>(kernel_.size()); }
  int fft_size() const { return fft_size_; }
  const CqtConfig& config() const { return cfg_; }

  // Complex CQT, frames x bins. Frame t is centred on sample t * hop.
  Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> transform(
      const Waveform& w) const {
    w.require_valid();
    if (w.sample_rate != sample_rate_) throw ValidationError("cqt: sample rate mismatch");
    if (static_cast<int>(w.samples.size()) < cfg_.hop_length) {
      throw ValidationError("cqt: waveform shorter than one hop");
    }
    const int frames = static_cast<int>(w.samples.size() / static_cast<std::size_t>(cfg_.hop_length));
    const int half = fft_size_ / 2;
    const int n_half = fft_size_ / 2 + 1;
    RealFft fft(fft_size_);
    std::vector<double> buf(static_cast<std::size_t>(fft_size_));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n_half));
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(frames, n_bins());
    const long long n = static_cast<long long>(w.samples.size());
    for (int t = 0; t < frames; ++t) {
      const long long start = static_cast<long long>(t) * cfg_.hop_length - half;
      for (int i = 0; i < fft_size_; ++i) {
        const long long idx = start + i;
        buf[static_cast<std::size_t>(i)] = (idx >= 0 && idx < n) ? w.samples[static_cast<std::size_t>(idx)] : 0.0;
      }
      fft.forward(buf, spec);
      for (int k = 0; k < n_bins(); ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (const auto& [bin, coef] : kernel_[static_cast<std::size_t>(k)]) {
          const std::complex<double> x =
              bin < n_half ? spec[static_cast<std::size_t>(bin)] : std::conj(spec[static_cast<std::size_t>(fft_size_ - bin)]);
          acc += x * coef;
        }
        out(t, k) = acc;
      }
    }
    return out;
  }

 private:
  void build_kernel() {
    const int k_bins = cfg_.n_bins();
    kernel_.resize(static_cast<std::size_t>(k_bins));
    const int half = fft_size_ / 2;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size_));
    // A complex FFT is needed for the atoms; do it with two real FFTs.
    RealFft fft(fft_size_);
    std::vector<double> re(static_cast<std::size_t>(fft_size_)), im(static_cast<std::size_t>(fft_size_));
    std::vector<std::complex<double>> sre(static_cast<std::size_t>(half + 1)), sim(static_cast<std::size_t>(half + 1));
    for (int k = 0; k < k_bins; ++k) {
      const auto atom = cqt_atom(cfg_, k, sample_rate_);
      const int len = static_cast<int>(atom.size());
      std::fill(re.begin(), re.end(), 0.0);
      std::fill(im.begin(), im.end(), 0.0);
      const int offset = half - len / 2;
      for (int i = 0; i < len; ++i) {
        re[static_cast<std::size_t>(offset + i)] = atom[static_cast<std::size_t>(i)].real();
        im[static_cast<std::size_t>(offset + i)] = atom[static_cast<std::size_t>(i)].imag();
      }
      fft.forward(re, sre);
      fft.forward(im, sim);
      auto half_spec = [&](const std::vector<std::complex<double>>& s, int f) {
        return f <= half ? s[static_cast<std::size_t>(f)] : std::conj(s[static_cast<std::size_t>(fft_size_ - f)]);
      };
      double peak = 0.0;
      for (int f = 0; f < fft_size_; ++f) {
        buf[static_cast<std::size_t>(f)] = half_spec(sre, f) + std::complex<double>(0.0, 1.0) * half_spec(sim, f);
        peak = std::max(peak, std::abs(buf[static_cast<std::size_t>(f)]));
      }
      // sum_n x[n] conj(a[n]) = (1/N) sum_f X[f] conj(A[f])
      auto& row = kernel_[static_cast<std::size_t>(k)];
      for (int f = 0; f < fft_size_; ++f) {
        const auto v = buf[static_cast<std::size_t>(f)];
        if (std::abs(v) >= cfg_.sparsity * peak) row.emplace_back(f, std::conj(v) / static_cast<double>(fft_size_));
      }
    }
  }

  CqtConfig cfg_;
  int sample_rate_;
  int fft_size_ = 1;
  std::vector<std::vector<std::pair<int, std::complex<double>>>> kernel_;
};

// Linearly interpolates a log spectrum sampled at geometric frequencies onto
// `points` uniformly spaced frequencies spanning the same range.
inline RowVectorD resample_log_axis(const RowVectorD& values, const std::vector<double>& freqs, int points) {
  const double lo = freqs.front();
  const double hi = freqs.back();
  RowVectorD out(points);
  std::size_t j = 0;
  for (int i = 0; i < points; ++i) {
    const double f = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    while (j + 2 < freqs.size() && freqs[j + 1] < f) ++j;
    const double f0 = freqs[j], f1 = freqs[j + 1];
    const double a = std::clamp((f - f0) / (f1 - f0), 0.0, 1.0);
    out(i) = (1.0 - a) * values(static_cast<Eigen::Index>(j)) + a * values(static_cast<Eigen::Index>(j) + 1);
  }
  return out;
}

// CQCC: |CQT|^2 -> natural log (floor 1e-10) -> uniform resampling of the
// geometric frequency axis to 2x the bin count -> orthonormal DCT-II, first
// n_coeffs coefficients.
inline FeatureMatrix cqcc(const Waveform& w, int bins_per_octave = 24, double fmin = 62.5, double fmax = 8000.0,
                          int n_coeffs = 20) {
  CqtConfig cfg;
  cfg.bins_per_octave = bins_per_octave;
  cfg.fmin = fmin;
  cfg.fmax = fmax;
  const ConstantQTransform cqt(cfg, w.sample_rate);
  const int k = cqt.n_bins();
  if (k < 2) throw ValidationError("cqcc: frequency range yields fewer than two CQT bins");
  const int points = 2 * k;
  if (n_coeffs < 1 || n_coeffs > points) throw ValidationError("cqcc: n_coeffs out of range");
  std::vector<double> freqs(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) freqs[static_cast<std::size_t>(i)] = cfg.bin_frequency(i);

  const auto spec = cqt.transform(w);
  const MatrixD dct = dct2_matrix(points).topRows(n_coeffs);
  FeatureMatrix out;
  out.values.resize(spec.rows(), n_coeffs);
  for (Eigen::Index t = 0; t < spec.rows(); ++t) {
    RowVectorD logp(k);
    for (int i = 0; i < k; ++i) logp(i) = std::log(std::max(std::norm(spec(t, i)), 1e-10));
    const RowVectorD uniform = resample_log_axis(logp, freqs, points);
    out.values.row(t) = (dct * uniform.transpose()).transpose();
  }
  out.frame_rate = static_cast<double>(w.sample_rate) / cfg.hop_length;
  out.kind = FeatureKind::CQCC;
  return out;
}

}  // namespace svdd
