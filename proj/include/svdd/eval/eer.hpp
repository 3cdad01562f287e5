// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include <limits>
#include <string>
#include <vector>

namespace svdd {

struct ScoredTrial {
  std::string clip_id;
  Label label = Label::Bonafide;
  double score = 0.0;  // higher = more bonafide
};

struct EerResult {
  double eer = 0.0;        // fraction in [0, 1]
  double threshold = 0.0;  // accept as bonafide when score >= threshold
};

// One point of the detection-error tradeoff at threshold t:
//   FRR(t) = P(score < t | bonafide), FAR(t) = P(score >= t | deepfake).
struct OperatingPoint {
  double threshold;
  double far;
  double frr;
};

// Operating points at every distinct score plus one above all scores, in
// increasing threshold order. FRR rises from 0 to 1, FAR falls from 1 to 0.
inline std::vector<OperatingPoint> operating_points(const std::vector<ScoredTrial>& trials) {
  std::size_t n_bona = 0, n_fake = 0;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw ValidationError("non-finite score for clip '" + t.clip_id + "'");
    (t.label == Label::Bonafide ? n_bona : n_fake) += 1;
  }
  if (n_bona == 0 || n_fake == 0) throw ValidationError("EER needs at least one trial of each class");

  std::vector<std::pair<double, Label>> sorted;
  sorted.reserve(trials.size());
  for (const auto& t : trials) sorted.emplace_back(t.score, t.label);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<OperatingPoint> points;
  std::size_t bona_below = 0, fake_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].first;
    points.push_back({t, static_cast<double>(n_fake - fake_below) / static_cast<double>(n_fake),
                      static_cast<double>(bona_below) / static_cast<double>(n_bona)});
    for (; i < sorted.size() && sorted[i].first == t; ++i) {
      (sorted[i].second == Label::Bonafide ? bona_below : fake_below) += 1;
    }
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return points;
}

// Equal error rate with linear interpolation between the two operating points
// that bracket the FAR = FRR crossing.
inline EerResult compute_eer(const std::vector<ScoredTrial>& trials) {
  const auto pts = operating_points(trials);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double gap = pts[i].frr - pts[i].far;
    if (gap < 0.0) continue;
    if (gap == 0.0 || i == 0) {
      const double thr = std::isfinite(pts[i].threshold) ? pts[i].threshold : pts[i - 1].threshold;
      return {pts[i].frr, thr};
    }
    const OperatingPoint& a = pts[i - 1];
    const OperatingPoint& b = pts[i];
    const double before = a.far - a.frr;  // > 0
    const double alpha = before / (before + gap);
    const double eer = a.frr + alpha * (b.frr - a.frr);
    const double thr = std::isfinite(b.threshold) ? a.threshold + alpha * (b.threshold - a.threshold) : a.threshold;
    return {eer, thr};
  }
  throw NumericError("EER sweep found no crossing");  // unreachable: the last point has FRR = 1 > FAR = 0
}

}  // namespace svdd
