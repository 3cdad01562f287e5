// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include <string>
#include <vector>

namespace svdd {

// Mono audio. Amplitudes are expected in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }

  void require_valid(std::string_view what = "waveform") const {
    if (sample_rate <= 0) throw ValidationError(std::string(what) + ": sample_rate must be positive");
    if (samples.empty()) throw ValidationError(std::string(what) + ": empty waveform");
  }
};

enum class FeatureKind { LogMel, MFCC, LFCC, CQCC, Encoding };

inline std::string_view feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::LogMel: return "LogMel";
    case FeatureKind::MFCC: return "MFCC";
    case FeatureKind::LFCC: return "LFCC";
    case FeatureKind::CQCC: return "CQCC";
    case FeatureKind::Encoding: return "Encoding";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  for (FeatureKind k : {FeatureKind::LogMel, FeatureKind::MFCC, FeatureKind::LFCC, FeatureKind::CQCC,
                        FeatureKind::Encoding}) {
    if (feature_kind_name(k) == s) return k;
  }
  throw FormatError("unknown feature kind '" + std::string(s) + "'");
}

// Time-major feature matrix: row t is the feature vector of frame t.
struct FeatureMatrix {
  MatrixD values;
  double frame_rate = 100.0;
  FeatureKind kind = FeatureKind::LogMel;
  std::string source_clip;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }

  void require_valid() const {
    if (values.rows() < 1 || values.cols() < 1) throw ValidationError("feature matrix must be at least 1x1");
    if (!values.allFinite()) throw NumericError("feature matrix for '" + source_clip + "' has non-finite values");
  }
};

enum class WindowKind { Hann };

struct StftConfig {
  int window_length = 400;
  int hop_length = 160;
  int fft_size = 400;
  WindowKind window = WindowKind::Hann;

  void require_valid() const {
    if (!(hop_length > 0 && hop_length <= window_length && window_length <= fft_size)) {
      throw ValidationError("stft config requires 0 < hop <= window <= fft_size");
    }
  }
};

// Energy VAD settings. Threshold is relative to the clip's overall RMS level.
struct VadConfig {
  double frame_ms = 30.0;
  double energy_threshold_db = -35.0;
  double min_speech_s = 1.0;
  double max_clip_s = 20.0;
  double merge_gap_s = 0.5;

  void require_valid() const {
    if (frame_ms <= 0) throw ValidationError("vad frame_ms must be positive");
    if (min_speech_s <= 0) throw ValidationError("vad min_speech_s must be positive");
    if (max_clip_s < min_speech_s) throw ValidationError("vad max_clip_s must be >= min_speech_s");
    if (merge_gap_s < 0) throw ValidationError("vad merge_gap_s must be non-negative");
  }
};

}  // namespace svdd
