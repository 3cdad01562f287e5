// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/filterbank.hpp"
#include "svdd/features/stft.hpp"
#include "svdd/features/types.hpp"

#include <cmath>

namespace svdd {

inline constexpr int kEncoderSampleRate = 16000;
inline constexpr int kDefaultMels = 80;
inline constexpr double kLogMelFloor = 1e-10;
// Dynamic range kept below the per-clip maximum (log10 units).
inline constexpr double kLogMelDynamicRange = 8.0;
// Normalised value of a frame sitting at the log floor.
inline constexpr double kLogMelSilence = (-10.0 + 4.0) / 4.0;

inline constexpr double kCepstralFloor = 1e-10;
inline constexpr int kDefaultCepstralFilters = 40;
inline constexpr int kDefaultCepstralCoeffs = 20;

// Log-mel spectrogram in the encoder's input convention:
//   power STFT -> mel filterbank -> log10(max(x, 1e-10))
//   -> clamp at (clip max - 8) -> (x + 4) / 4
inline FeatureMatrix log_mel_spectrogram(const Waveform& w, const StftConfig& cfg = {}, int n_mels = kDefaultMels) {
  if (w.sample_rate != kEncoderSampleRate) {
    throw ValidationError("log_mel_spectrogram expects 16000 Hz audio, got " + std::to_string(w.sample_rate));
  }
  const MatrixD power = power_spectrogram(w, cfg);
  MatrixD mel = apply_filterbank(power, mel_filterbank(w.sample_rate, cfg.fft_size, n_mels));
  mel = mel.unaryExpr([](double v) { return std::log10(std::max(v, kLogMelFloor)); });
  const double ceiling = mel.maxCoeff();
  mel = mel.unaryExpr([ceiling](double v) { return (std::max(v, ceiling - kLogMelDynamicRange) + 4.0) / 4.0; });
  FeatureMatrix out;
  out.values = std::move(mel);
  out.frame_rate = static_cast<double>(w.sample_rate) / cfg.hop_length;
  out.kind = FeatureKind::LogMel;
  return out;
}

// Natural-log filterbank energies followed by the orthonormal DCT-II; keeps
// the first n_coeffs coefficients of each frame.
inline MatrixD cepstra_from_energies(const MatrixD& energies, int n_coeffs) {
  const int n = static_cast<int>(energies.cols());
  if (n_coeffs < 1 || n_coeffs > n) throw ValidationError("n_coeffs must be in [1, n_filters]");
  const MatrixD logs = energies.unaryExpr([](double v) { return std::log(std::max(v, kCepstralFloor)); });
  const MatrixD dct = dct2_matrix(n);
  return logs * dct.topRows(n_coeffs).transpose();
}

inline FeatureMatrix mfcc(const Waveform& w, const StftConfig& cfg = {}, int n_mels = kDefaultCepstralFilters,
                          int n_coeffs = kDefaultCepstralCoeffs) {
  if (n_coeffs > n_mels) throw ValidationError("mfcc: n_coeffs must not exceed n_mels");
  const MatrixD power = power_spectrogram(w, cfg);
  FeatureMatrix out;
  out.values = cepstra_from_energies(apply_filterbank(power, mel_filterbank(w.sample_rate, cfg.fft_size, n_mels)),
                                     n_coeffs);
  out.frame_rate = static_cast<double>(w.sample_rate) / cfg.hop_length;
  out.kind = FeatureKind::MFCC;
  return out;
}

inline FeatureMatrix lfcc(const Waveform& w, const StftConfig& cfg = {}, int n_filters = kDefaultCepstralFilters,
                          int n_coeffs = kDefaultCepstralCoeffs) {
  if (n_coeffs > n_filters) throw ValidationError("lfcc: n_coeffs must not exceed n_filters");
  const MatrixD power = power_spectrogram(w, cfg);
  FeatureMatrix out;
  out.values = cepstra_from_energies(
      apply_filterbank(power, linear_filterbank(w.sample_rate, cfg.fft_size, n_filters)), n_coeffs);
  out.frame_rate = static_cast<double>(w.sample_rate) / cfg.hop_length;
  out.kind = FeatureKind::LFCC;
  return out;
}

// Log power spectrogram in dB (floor -100 dB), used for visual comparison.
inline MatrixD log_power_spectrogram_db(const Waveform& w, const StftConfig& cfg = {}) {
  return power_spectrogram(w, cfg).unaryExpr([](double v) { return 10.0 * std::log10(std::max(v, 1e-10)); });
}

}  // namespace svdd
