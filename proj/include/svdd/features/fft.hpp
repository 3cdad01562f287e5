// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace svdd {

// Real-to-complex FFT of a fixed size backed by FFTW.
//
// FFTW planning is not thread-safe, so plans are created once per size under
// a process-wide lock and cached for the lifetime of the process. Execution
// goes through the new-array interface, which is safe to call concurrently.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n), plan_(plan_for(n)) {}

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  // in.size() == size(); out.size() == bins().
  void forward(std::span<double> in, std::span<std::complex<double>> out) const {
    if (static_cast<int>(in.size()) != n_ || static_cast<int>(out.size()) != bins()) {
      throw ShapeError("RealFft::forward: buffer size mismatch");
    }
    fftw_execute_dft_r2c(plan_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  }

 private:
  static fftw_plan plan_for(int n) {
    if (n <= 0) throw ValidationError("fft size must be positive");
    static std::mutex mu;
    static std::map<int, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw Error("fftw planning failed for size " + std::to_string(n));
    cache.emplace(n, p);
    return p;
  }

  int n_;
  fftw_plan plan_;
};

}  // namespace svdd
