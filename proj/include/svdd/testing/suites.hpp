// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Oracle comparison suites shared by `svdd selftest` and the acceptance
// binary. Each returns the measured worst deviation next to its tolerance.

#pragma once

#include "svdd/data/manifest.hpp"
#include "svdd/encoder/model.hpp"
#include "svdd/eval/eer.hpp"
#include "svdd/features.hpp"
#include "svdd/heads/train.hpp"
#include "svdd/testing/data_fixtures.hpp"
#include "svdd/testing/encoder_oracles.hpp"
#include "svdd/testing/eval_oracles.hpp"
#include "svdd/testing/feature_oracles.hpp"

#include <chrono>
#include <random>

namespace svdd::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Runs fn and turns any exception into a failed result.
template <class Fn>
CheckResult run_check(const std::string& name, Fn&& fn) {
  Stopwatch sw;
  CheckResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.name = name;
  r.seconds = sw.seconds();
  return r;
}

inline MatrixF random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(scale * normal_draw(rng));
  return m;
}

// ---- EER ----------------------------------------------------------------------------

inline std::vector<ScoredTrial> random_score_set(std::mt19937_64& rng, std::size_t max_trials) {
  const std::size_t n = 2 + rng() % (max_trials - 1);
  std::vector<ScoredTrial> out(n);
  const bool coarse = rng() % 3 == 0;  // many tied scores
  for (std::size_t i = 0; i < n; ++i) {
    out[i].clip_id = std::to_string(i);
    out[i].label = i == 0 ? Label::Bonafide : i == 1 ? Label::Deepfake : (rng() % 2 ? Label::Bonafide : Label::Deepfake);
    double s = uniform_draw(rng) + (out[i].label == Label::Bonafide ? 0.3 * uniform_draw(rng) : 0.0);
    if (coarse) s = std::round(s * 10.0) / 10.0;
    out[i].score = std::clamp(s, 0.0, 1.0);
  }
  return out;
}

inline CheckResult eer_oracle(std::size_t n_sets, std::size_t max_trials = 1000, double tol = 1e-9) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (std::size_t k = 0; k < n_sets; ++k) {
    const auto t = random_score_set(rng, max_trials);
    worst = std::max(worst, std::abs(compute_eer(t).eer - oracle::brute_force_eer(t)));
  }
  return {"", worst <= tol, std::to_string(n_sets) + " sets, max |diff| " + sci(worst) + " (tol " + sci(tol) + ")"};
}

inline CheckResult eer_hand_cases() {
  auto set = [](std::vector<double> bona, std::vector<double> fake) {
    std::vector<ScoredTrial> t;
    for (double s : bona) t.push_back({"b", Label::Bonafide, s});
    for (double s : fake) t.push_back({"f", Label::Deepfake, s});
    return compute_eer(t).eer;
  };
  const double a = set({0.9, 0.8}, {0.1, 0.2});
  const double b = set({0.1, 0.9}, {0.1, 0.9});
  const double c = set({0.6, 0.4, 0.8}, {0.5, 0.3, 0.2});
  const bool ok = a == 0.0 && b == 0.5 && c == 1.0 / 3.0;
  return {"", ok, "got " + format_double(a) + ", " + format_double(b) + ", " + format_double(c) + " (want 0, 0.5, 1/3)"};
}

// ---- encoder ------------------------------------------------------------------------

inline Linear random_linear(int out, int in, std::uint64_t seed) {
  return {random_matrix(out, in, seed, 1.0 / std::sqrt(static_cast<double>(in))), random_matrix(1, out, seed + 1, 0.1)};
}

inline AttentionWeights random_attention(int d, std::uint64_t seed) {
  return {random_linear(d, d, seed), random_linear(d, d, seed + 10), random_linear(d, d, seed + 20),
          random_linear(d, d, seed + 30)};
}

inline BlockWeights random_block(int d, int f, std::uint64_t seed) {
  BlockWeights b;
  b.attn_ln = {RowVectorF::Ones(d) + random_matrix(1, d, seed, 0.1), random_matrix(1, d, seed + 1, 0.1)};
  b.attn = random_attention(d, seed + 2);
  b.mlp_ln = {RowVectorF::Ones(d) + random_matrix(1, d, seed + 50, 0.1), random_matrix(1, d, seed + 51, 0.1)};
  b.fc1 = random_linear(f, d, seed + 60);
  b.fc2 = random_linear(d, f, seed + 70);
  return b;
}

inline Conv1dWeights random_conv(int out, int in, std::uint64_t seed) {
  return {random_matrix(out, in * 3, seed, 1.0 / std::sqrt(3.0 * in)), random_matrix(1, out, seed + 1, 0.1), 3};
}

// Random instances with T <= 8 frames and widths d <= 16.
inline CheckResult encoder_oracles(int n_seeds, double tol = 1e-5) {
  double worst[5] = {0, 0, 0, 0, 0};
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = 1000 + 97 * static_cast<std::uint64_t>(s);
    const int T = 1 + s % 8;
    const int heads = 1 << (s % 3);  // 1, 2, 4
    const int d = heads * (2 + s % 3);  // <= 16
    const MatrixF q = random_matrix(T, d, seed), k = random_matrix(T, d, seed + 1), v = random_matrix(T, d, seed + 2);
    worst[0] = std::max(worst[0], oracle::max_abs_diff(scaled_dot_attention(q, k, v),
                                                       oracle::attention(oracle::to_grid(q), oracle::to_grid(k),
                                                                         oracle::to_grid(v))));
    const AttentionWeights w = random_attention(d, seed + 3);
    worst[1] = std::max(worst[1], oracle::max_abs_diff(multi_head_self_attention(q, w, heads),
                                                       oracle::mhsa(oracle::to_grid(q), w, heads)));
    const BlockWeights b = random_block(d, 4 * d, seed + 100);
    worst[2] = std::max(worst[2], oracle::max_abs_diff(transformer_block(q, b, heads),
                                                       oracle::block(oracle::to_grid(q), b, heads)));
    const int mels = 2 + s % 15;
    const MatrixF mel = random_matrix(T, mels, seed + 200);
    const Conv1dWeights c1 = random_conv(d, mels, seed + 300), c2 = random_conv(d, d, seed + 400);
    worst[3] = std::max(worst[3], oracle::max_abs_diff(conv_stem(mel, c1, c2),
                                                       oracle::conv_stem(oracle::to_grid(mel), c1, c2)));
    EncoderConfig cfg;
    cfg.size = SizeName::Custom;
    cfg.n_blocks = 2;
    cfg.d_model = 16;
    cfg.n_heads = 4;
    cfg.d_ff = 64;
    cfg.n_mels = 80;
    cfg.max_frames = 8;
    const EncoderModel model = random_encoder(cfg, seed + 500);
    FeatureMatrix m;
    m.values = random_matrix(T, 80, seed + 600).cast<double>();
    const MatrixF fitted = fit_mel_frames(m, cfg.max_frames);
    worst[4] = std::max(worst[4], oracle::max_abs_diff(encode(m, model).values, oracle::encode(fitted, model)));
  }
  const double w = *std::max_element(std::begin(worst), std::end(worst));
  return {"", w <= tol,
          std::to_string(n_seeds) + " seeds, max |diff| attention " + sci(worst[0]) + ", mhsa " + sci(worst[1]) +
              ", block " + sci(worst[2]) + ", stem " + sci(worst[3]) + ", encode " + sci(worst[4]) + " (tol " +
              sci(tol) + ")"};
}

// A 30 s clip gives 3000 mel frames and 1500 encoder frames for every size;
// when `models_dir` is set the layout manifests there must agree exactly.
inline CheckResult architecture_arithmetic(const std::filesystem::path& models_dir = {}) {
  Waveform w;
  w.samples.assign(30 * kEncoderSampleRate, 0.0f);
  const FeatureMatrix mel = log_mel_spectrogram(w);
  bool ok = mel.frames() == 3000;
  std::string detail = "mel frames " + std::to_string(mel.frames());
  for (SizeName s : {SizeName::Tiny, SizeName::Base, SizeName::Small, SizeName::Medium}) {
    const EncoderConfig c = encoder_config(s);
    const auto params = parameter_count(encoder_layout(c));
    ok = ok && c.output_frames() == 1500 && fit_mel_frames(mel, c.max_frames).rows() == 3000;
    detail += "; " + std::string(size_name_str(s)) + " " + std::to_string(c.output_frames()) + " frames, " +
              std::to_string(params) + " params";
    if (!models_dir.empty()) {
      const auto path = models_dir / ("layout_" + std::string(size_name_str(s)) + ".json");
      const auto shipped = nlohmann::json::parse(read_file(path));
      const bool match = shipped == layout_manifest_json(c) && shipped.at("parameter_count").get<std::int64_t>() == params;
      if (!match) detail += " (manifest mismatch)";
      ok = ok && match;
    }
  }
  // Full-length stem on the smallest real width, to confirm the frame count end to end.
  EncoderConfig toy;
  toy.size = SizeName::Custom;
  toy.n_blocks = 1;
  toy.d_model = 8;
  toy.n_heads = 2;
  toy.d_ff = 16;
  const MatrixF stem = conv_stem(fit_mel_frames(mel, toy.max_frames), random_conv(8, 80, 1), random_conv(8, 8, 2));
  ok = ok && stem.rows() == 1500;
  detail += "; stem output " + std::to_string(stem.rows()) + " frames";
  return {"", ok, detail};
}

// ---- features -----------------------------------------------------------------------

inline CheckResult filterbank_dct(double tol = 1e-9) {
  std::mt19937_64 rng(17);
  Waveform w;
  w.samples.resize(8000);
  for (auto& s : w.samples) s = static_cast<float>(0.3 * normal_draw(rng));
  const StftConfig cfg;
  const MatrixD power = power_spectrogram(w, cfg);
  double worst_fb = 0.0;
  for (const MatrixD& fb : {mel_filterbank(kEncoderSampleRate, cfg.fft_size, 80),
                            linear_filterbank(kEncoderSampleRate, cfg.fft_size, 40)}) {
    const MatrixD out = apply_filterbank(power, fb);
    for (Eigen::Index t = 0; t < power.rows(); ++t) {
      std::vector<double> row(power.row(t).data(), power.row(t).data() + power.cols());
      const auto direct = oracle::direct_filterbank(row, fb);
      for (Eigen::Index m = 0; m < fb.rows(); ++m) {
        const double ref = direct[static_cast<std::size_t>(m)];
        worst_fb = std::max(worst_fb, std::abs(out(t, m) - ref) / std::max(std::abs(ref), 1e-300));
      }
    }
  }
  double worst_dct = 0.0;
  for (int n : {2, 13, 20, 40, 80}) {
    const MatrixD m = dct2_matrix(n);
    worst_dct = std::max(worst_dct, (m.transpose() * m - MatrixD::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return {"", worst_fb <= tol && worst_dct <= tol,
          "filterbank max rel " + sci(worst_fb) + ", DCT orthonormality " + sci(worst_dct) + " (tol " + sci(tol) + ")"};
}

// ---- heads --------------------------------------------------------------------------

template <class T>
nn::Tensor4<T> random_input(int n, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Tensor4<T> x(n, 1, h, w);
  for (auto& v : x.data) v = static_cast<T>(normal_draw(rng));
  return x;
}

// The tiny CNN has under 200 parameter entries, so it gets fewer checks.
inline CheckResult grad_checks(std::size_t cnn_checks = 150, std::size_t resnet_checks = 200, double tol = 1e-3,
                               double h = 1e-3) {
  nn::CnnConfig cc;
  cc.input_height = 8;
  cc.input_width = 8;
  cc.channels1 = 2;
  cc.channels2 = 2;
  nn::CnnHead<double> cnn(cc);
  cnn.init(5);
  const auto rc = grad_check<double>(cnn, random_input<double>(4, 8, 8, 6), {0, 1, 1, 0}, cnn_checks, 7, h);

  nn::ResNetConfig rc_cfg;
  rc_cfg.input_height = 16;
  rc_cfg.input_width = 16;
  rc_cfg.stem_channels = 4;
  rc_cfg.widths = {4, 4, 8, 8};
  rc_cfg.blocks = {1, 1, 1, 1};
  nn::ResNetHead<double> resnet(rc_cfg);
  resnet.init(8);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  const auto rr = grad_check<double>(resnet, random_input<double>(16, 16, 16, 9), labels, resnet_checks, 10, h);

  const bool ok = rc.checked == cnn_checks && rr.checked == resnet_checks && rc.max_relative_error < tol &&
                  rr.max_relative_error < tol;
  return {"", ok,
          "CNN max rel " + sci(rc.max_relative_error) + " over " + std::to_string(rc.checked) + " entries (" +
              std::to_string(rc.kink_crossings) + " kink crossings skipped), ResNet max rel " +
              sci(rr.max_relative_error) + " over " + std::to_string(rr.checked) + " (" +
              std::to_string(rr.kink_crossings) + " skipped); h " + sci(h) + ", tol " + sci(tol)};
}

// ---- manifests ----------------------------------------------------------------------

// The reference manifest must pass; removing or adding one clip of either
// class in any partition must produce a count violation for that partition.
inline CheckResult manifest_validation() {
  const Manifest ref = oracle::reference_manifest();
  const auto base = validate_against_reference(ref);
  std::size_t mutations = 0, caught = 0;
  for (Partition p : kAllPartitions) {
    for (Label l : {Label::Bonafide, Label::Deepfake}) {
      for (int direction : {-1, +1}) {
        Manifest m = ref;
        const auto it = std::find_if(m.records.begin(), m.records.end(),
                                     [&](const ClipRecord& r) { return r.partition == p && r.label == l; });
        if (it == m.records.end()) continue;
        if (direction < 0) {
          m.records.erase(it);
        } else {
          ClipRecord extra = *it;
          extra.clip_id += "_extra";
          m.records.push_back(extra);
        }
        ++mutations;
        const auto rep = validate_against_reference(m);
        const std::string tag = std::string(partition_str(p)) + ":";
        const bool named = std::any_of(rep.violations.begin(), rep.violations.end(), [&](const Violation& v) {
          return v.kind == "count" && v.message.find(tag) != std::string::npos;
        });
        if (named) ++caught;
      }
    }
  }
  const bool ok = base.ok() && mutations == 24 && caught == mutations;
  return {"", ok,
          "reference: " + std::to_string(base.violations.size()) + " violations; mutated counts caught " +
              std::to_string(caught) + "/" + std::to_string(mutations)};
}

}  // namespace svdd::checks
