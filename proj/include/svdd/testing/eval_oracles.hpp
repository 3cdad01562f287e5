// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force EER used as the reference for compute_eer. Test-only.

#pragma once

#include "svdd/eval/eer.hpp"

#include <set>

namespace svdd::oracle {

// Candidate thresholds: below every score, every midpoint between adjacent
// distinct scores, above every score. Each is scored by a full pass over the
// trials, then the ROC polyline is scanned segment by segment for the point
// where FAR - FRR changes sign.
inline double brute_force_eer(const std::vector<ScoredTrial>& trials) {
  std::set<double> distinct;
  for (const auto& t : trials) distinct.insert(t.score);
  std::vector<double> cuts;
  cuts.push_back(*distinct.begin() - 1.0);
  for (auto it = distinct.begin(); std::next(it) != distinct.end(); ++it) cuts.push_back(0.5 * (*it + *std::next(it)));
  cuts.push_back(*distinct.rbegin() + 1.0);

  std::vector<double> far, frr;
  for (double c : cuts) {
    double fa = 0, fr = 0, nb = 0, nf = 0;
    for (const auto& t : trials) {
      if (t.label == Label::Bonafide) {
        nb += 1;
        if (t.score < c) fr += 1;
      } else {
        nf += 1;
        if (t.score >= c) fa += 1;
      }
    }
    far.push_back(fa / nf);
    frr.push_back(fr / nb);
  }
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double d0 = far[i] - frr[i], d1 = far[i + 1] - frr[i + 1];
    if (d0 == 0.0) return far[i];
    if (d0 > 0.0 && d1 <= 0.0) {
      // Intersect segment (far, frr)(s) = p_i + s (p_{i+1} - p_i) with far = frr.
      const double s = d0 / (d0 - d1);
      return frr[i] + s * (frr[i + 1] - frr[i]);
    }
  }
  return far.back();
}

}  // namespace svdd::oracle
