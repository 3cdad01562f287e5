// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/types.hpp"

#include <cmath>
#include <vector>

namespace svdd {

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  bool operator==(const Interval&) const = default;
};

namespace detail {

struct FrameSpan {
  int begin;  // inclusive frame index
  int end;    // exclusive frame index
};

// Splits [span.begin, span.end) at its quietest interior frame until every
// piece is at most max_frames long. Split points keep both halves at least
// min_frames long when the span allows it.
inline void split_long(const FrameSpan& span, const std::vector<double>& energy_db, int max_frames, int min_frames,
                       std::vector<FrameSpan>& out) {
  const int len = span.end - span.begin;
  if (len <= max_frames) {
    out.push_back(span);
    return;
  }
  int lo = span.begin + std::max(1, min_frames);
  int hi = span.end - std::max(1, min_frames);
  if (lo > hi) {
    lo = span.begin + 1;
    hi = span.end - 1;
  }
  int best = lo;
  for (int f = lo; f <= hi; ++f) {
    if (energy_db[static_cast<std::size_t>(f)] < energy_db[static_cast<std::size_t>(best)]) best = f;
  }
  split_long({span.begin, best}, energy_db, max_frames, min_frames, out);
  split_long({best, span.end}, energy_db, max_frames, min_frames, out);
}

}  // namespace detail

// Per-frame energy in dB (mean square, non-overlapping frames of frame_ms).
inline std::vector<double> frame_energy_db(const Waveform& w, double frame_ms) {
  const std::size_t frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frame_ms * w.sample_rate / 1000.0)));
  const std::size_t n_frames = w.samples.size() / frame;
  std::vector<double> db(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      const double s = w.samples[f * frame + i];
      acc += s * s;
    }
    db[f] = 10.0 * std::log10(acc / static_cast<double>(frame) + 1e-20);
  }
  return db;
}

// Energy-threshold voice activity detection.
//
// A frame is active when its energy exceeds the clip's mean-square level by
// energy_threshold_db (negative: below the clip level). Active runs closer
// than merge_gap_s are merged, runs shorter than min_speech_s dropped, and
// runs longer than max_clip_s split at their quietest interior frame.
// Returns sorted, disjoint intervals inside [0, duration].
inline std::vector<Interval> segment_by_vad(const Waveform& w, const VadConfig& cfg = {}) {
  cfg.require_valid();
  w.require_valid();
  const std::size_t frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.frame_ms * w.sample_rate / 1000.0)));
  if (w.samples.size() < frame) throw ValidationError("vad: waveform shorter than one frame");
  const double frame_s = static_cast<double>(frame) / w.sample_rate;

  double total = 0.0;
  for (float s : w.samples) total += static_cast<double>(s) * s;
  if (total <= 0.0) return {};
  const double clip_db = 10.0 * std::log10(total / static_cast<double>(w.samples.size()));
  const std::vector<double> db = frame_energy_db(w, cfg.frame_ms);
  const double threshold = clip_db + cfg.energy_threshold_db;

  std::vector<detail::FrameSpan> runs;
  for (int f = 0; f < static_cast<int>(db.size()); ++f) {
    if (db[static_cast<std::size_t>(f)] <= threshold) continue;
    if (!runs.empty() && runs.back().end == f) {
      runs.back().end = f + 1;
    } else {
      runs.push_back({f, f + 1});
    }
  }

  std::vector<detail::FrameSpan> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && (r.begin - merged.back().end) * frame_s < cfg.merge_gap_s) {
      merged.back().end = r.end;
    } else {
      merged.push_back(r);
    }
  }

  const int min_frames = static_cast<int>(std::ceil(cfg.min_speech_s / frame_s - 1e-9));
  const int max_frames = std::max(1, static_cast<int>(std::floor(cfg.max_clip_s / frame_s + 1e-9)));
  std::vector<detail::FrameSpan> pieces;
  for (const auto& r : merged) {
    if (r.end - r.begin < min_frames) continue;
    detail::split_long(r, db, max_frames, min_frames, pieces);
  }

  std::vector<Interval> out;
  for (const auto& p : pieces) {
    if (p.end - p.begin < min_frames) continue;
    out.push_back({p.begin * frame_s, std::min(p.end * frame_s, w.duration_s())});
  }
  return out;
}

}  // namespace svdd
