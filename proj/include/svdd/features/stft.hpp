// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/fft.hpp"
#include "svdd/features/types.hpp"

#include <complex>
#include <vector>

namespace svdd {

// Periodic Hann window of `length`, zero-padded symmetrically to `fft_size`.
inline std::vector<double> padded_hann(int length, int fft_size) {
  std::vector<double> w(static_cast<std::size_t>(fft_size), 0.0);
  const int left = (fft_size - length) / 2;
  for (int i = 0; i < length; ++i) {
    w[static_cast<std::size_t>(left + i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / length);
  }
  return w;
}

// Reflect-pads the signal by fft_size/2 on both sides (frames are centred on
// multiples of the hop). Requires samples.size() > fft_size/2.
inline std::vector<double> reflect_pad(const std::vector<float>& x, int pad) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(static_cast<std::size_t>(n + 2 * pad));
  for (int i = 0; i < n + 2 * pad; ++i) {
    int j = i - pad;
    if (n == 1) j = 0;
    while (j < 0 || j >= n) {
      if (j < 0) j = -j;
      if (j >= n) j = 2 * (n - 1) - j;
    }
    out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(j)];
  }
  return out;
}

// Number of frames produced by power_spectrogram for n samples.
inline int stft_frame_count(std::size_t n, const StftConfig& cfg) {
  return static_cast<int>(n / static_cast<std::size_t>(cfg.hop_length));
}

// Magnitude-squared STFT, T x (fft_size/2 + 1).
//
// Frames are centred (reflect padding of fft_size/2) and the final frame is
// dropped, which yields exactly floor(n / hop) frames: 3000 frames for 30 s
// at 16 kHz with a 160-sample hop.
inline MatrixD power_spectrogram(const Waveform& w, const StftConfig& cfg) {
  cfg.require_valid();
  w.require_valid();
  if (static_cast<int>(w.samples.size()) < cfg.window_length) {
    throw ValidationError("waveform shorter than one analysis window (" + std::to_string(w.samples.size()) +
                          " < " + std::to_string(cfg.window_length) + " samples)");
  }
  const int pad = cfg.fft_size / 2;
  const std::vector<double> padded = reflect_pad(w.samples, pad);
  const std::vector<double> window = padded_hann(cfg.window_length, cfg.fft_size);
  const int frames = stft_frame_count(w.samples.size(), cfg);
  RealFft fft(cfg.fft_size);
  MatrixD power(frames, fft.bins());
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(fft.bins()));
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * static_cast<std::size_t>(cfg.hop_length);
    for (int i = 0; i < cfg.fft_size; ++i) {
      buf[static_cast<std::size_t>(i)] = padded[start + static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
    }
    fft.forward(buf, spec);
    for (int k = 0; k < fft.bins(); ++k) power(t, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  }
  return power;
}

}  // namespace svdd
