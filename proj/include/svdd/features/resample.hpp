// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/types.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace svdd {

// Band-limited resampling with a Kaiser-windowed sinc kernel.
//
// Quality settings (fixed so that outputs are reproducible):
//   taps   = 64 (32 on each side of the interpolation point)
//   window = Kaiser, beta = 8.6
//   cutoff = 0.95 x the lower of the two Nyquist frequencies
// Each polyphase filter is normalised to unit DC gain.
struct ResamplerSettings {
  int taps = 64;
  double kaiser_beta = 8.6;
  double cutoff = 0.95;
};

namespace detail {

inline double kaiser_window(double r, double beta) {
  if (std::abs(r) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, beta);
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}

// Filter taps for fractional offset `frac` in [0, 1): tap j (0-based) weights
// input sample i0 + j - (half - 1).
inline std::vector<double> sinc_phase(double frac, double fc, const ResamplerSettings& s) {
  const int half = s.taps / 2;
  std::vector<double> h(static_cast<std::size_t>(s.taps));
  double sum = 0.0;
  for (int j = 0; j < s.taps; ++j) {
    const double u = static_cast<double>(j - (half - 1)) - frac;
    const double v = fc * sinc(fc * u) * kaiser_window(u / half, s.kaiser_beta);
    h[static_cast<std::size_t>(j)] = v;
    sum += v;
  }
  for (double& v : h) v /= sum;
  return h;
}

}  // namespace detail

inline Waveform resample(const Waveform& in, int target_rate, const ResamplerSettings& settings = {}) {
  in.require_valid("resample input");
  if (target_rate <= 0) throw ValidationError("resample: target rate must be positive");
  if (in.sample_rate == target_rate) return in;

  const long long g = std::gcd(static_cast<long long>(in.sample_rate), static_cast<long long>(target_rate));
  const long long up = target_rate / g;       // L
  const long long down = in.sample_rate / g;  // M
  const double fc = settings.cutoff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const int half = settings.taps / 2;

  const auto n_in = static_cast<long long>(in.samples.size());
  const long long n_out = std::max<long long>(1, (n_in * up + down / 2) / down);

  constexpr long long kMaxTable = 4096;
  std::vector<std::vector<double>> table;
  if (up <= kMaxTable) {
    table.reserve(static_cast<std::size_t>(up));
    for (long long p = 0; p < up; ++p) {
      table.push_back(detail::sinc_phase(static_cast<double>(p) / static_cast<double>(up), fc, settings));
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  std::vector<double> scratch;
  for (long long n = 0; n < n_out; ++n) {
    const long long pos = n * down;
    const long long i0 = pos / up;
    const long long phase = pos % up;
    const std::vector<double>* h;
    if (!table.empty()) {
      h = &table[static_cast<std::size_t>(phase)];
    } else {
      scratch = detail::sinc_phase(static_cast<double>(phase) / static_cast<double>(up), fc, settings);
      h = &scratch;
    }
    double acc = 0.0;
    for (int j = 0; j < settings.taps; ++j) {
      const long long idx = i0 + j - (half - 1);
      if (idx < 0 || idx >= n_in) continue;
      acc += (*h)[static_cast<std::size_t>(j)] * in.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace svdd
