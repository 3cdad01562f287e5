// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/encoder/archive.hpp"
#include "svdd/encoder/config.hpp"
#include "svdd/encoder/ops.hpp"
#include "svdd/features/cepstral.hpp"
#include "svdd/features/types.hpp"

#include <filesystem>
#include <optional>
#include <random>

namespace svdd {

// Immutable after construction; safe to share across threads.
struct EncoderModel {
  EncoderConfig config;
  Conv1dWeights conv1;
  Conv1dWeights conv2;
  std::vector<BlockWeights> blocks;
  LayerNormParams ln_post;
};

struct Encoding {
  MatrixF values;  // T' x d_model
  std::string source_clip;
  SizeName model_size = SizeName::Tiny;

  FeatureMatrix as_features() const {
    FeatureMatrix f;
    f.values = values.cast<double>();
    f.kind = FeatureKind::Encoding;
    f.frame_rate = 50.0;
    f.source_clip = source_clip;
    return f;
  }
};

namespace detail {

inline MatrixF tensor_matrix(const NamedTensor& t, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const MatrixF>(t.data.data(), rows, cols);
}

inline RowVectorF tensor_row(const NamedTensor& t) {
  return Eigen::Map<const RowVectorF>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

inline NamedTensor matrix_tensor(const MatrixF& m, std::vector<std::int64_t> shape) {
  NamedTensor t;
  t.shape = std::move(shape);
  t.data.assign(m.data(), m.data() + m.size());
  return t;
}

inline NamedTensor row_tensor(const RowVectorF& v) {
  NamedTensor t;
  t.shape = {v.size()};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

}  // namespace detail

inline EncoderModel encoder_from_archive(const TensorArchive& archive, const EncoderConfig& cfg) {
  cfg.require_valid();
  validate_against_layout(archive, encoder_layout(cfg));
  const auto& t = archive.tensors;
  auto get = [&](const std::string& name) -> const NamedTensor& { return t.at(name); };
  const Eigen::Index d = cfg.d_model, f = cfg.d_ff;
  auto linear = [&](const std::string& p, Eigen::Index out, Eigen::Index in) {
    return Linear{detail::tensor_matrix(get(p + ".weight"), out, in), detail::tensor_row(get(p + ".bias"))};
  };
  auto ln = [&](const std::string& p) {
    return LayerNormParams{detail::tensor_row(get(p + ".weight")), detail::tensor_row(get(p + ".bias"))};
  };
  EncoderModel m;
  m.config = cfg;
  m.conv1 = {detail::tensor_matrix(get("encoder.conv1.weight"), d, cfg.n_mels * 3),
             detail::tensor_row(get("encoder.conv1.bias")), 3};
  m.conv2 = {detail::tensor_matrix(get("encoder.conv2.weight"), d, d * 3), detail::tensor_row(get("encoder.conv2.bias")),
             3};
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const std::string p = block_prefix(i);
    BlockWeights b;
    b.attn_ln = ln(p + "attn_ln");
    b.attn.query = linear(p + "attn.query", d, d);
    b.attn.key = linear(p + "attn.key", d, d);
    b.attn.value = linear(p + "attn.value", d, d);
    b.attn.out = linear(p + "attn.out", d, d);
    b.mlp_ln = ln(p + "mlp_ln");
    b.fc1 = linear(p + "mlp.0", f, d);
    b.fc2 = linear(p + "mlp.2", d, f);
    m.blocks.push_back(std::move(b));
  }
  m.ln_post = ln("encoder.ln_post");
  return m;
}

inline TensorArchive encoder_to_archive(const EncoderModel& m) {
  using detail::matrix_tensor;
  using detail::row_tensor;
  const auto& c = m.config;
  const std::int64_t d = c.d_model, f = c.d_ff;
  TensorArchive a;
  a.metadata = {{"kind", "encoder"}, {"config", to_json(c)}};
  a.tensors["encoder.conv1.weight"] = matrix_tensor(m.conv1.kernel, {d, c.n_mels, 3});
  a.tensors["encoder.conv1.bias"] = row_tensor(m.conv1.bias);
  a.tensors["encoder.conv2.weight"] = matrix_tensor(m.conv2.kernel, {d, d, 3});
  a.tensors["encoder.conv2.bias"] = row_tensor(m.conv2.bias);
  for (int i = 0; i < c.n_blocks; ++i) {
    const std::string p = block_prefix(i);
    const BlockWeights& b = m.blocks[static_cast<std::size_t>(i)];
    a.tensors[p + "attn_ln.weight"] = row_tensor(b.attn_ln.gain);
    a.tensors[p + "attn_ln.bias"] = row_tensor(b.attn_ln.bias);
    const std::pair<const char*, const Linear*> projections[] = {
        {"query", &b.attn.query}, {"key", &b.attn.key}, {"value", &b.attn.value}, {"out", &b.attn.out}};
    for (const auto& [name, lin] : projections) {
      a.tensors[p + "attn." + name + ".weight"] = matrix_tensor(lin->weight, {d, d});
      a.tensors[p + "attn." + name + ".bias"] = row_tensor(lin->bias);
    }
    a.tensors[p + "mlp_ln.weight"] = row_tensor(b.mlp_ln.gain);
    a.tensors[p + "mlp_ln.bias"] = row_tensor(b.mlp_ln.bias);
    a.tensors[p + "mlp.0.weight"] = matrix_tensor(b.fc1.weight, {f, d});
    a.tensors[p + "mlp.0.bias"] = row_tensor(b.fc1.bias);
    a.tensors[p + "mlp.2.weight"] = matrix_tensor(b.fc2.weight, {d, f});
    a.tensors[p + "mlp.2.bias"] = row_tensor(b.fc2.bias);
  }
  a.tensors["encoder.ln_post.weight"] = row_tensor(m.ln_post.gain);
  a.tensors["encoder.ln_post.bias"] = row_tensor(m.ln_post.bias);
  return a;
}

// Loads and validates an encoder archive against `cfg`.
inline EncoderModel load_weights(const std::filesystem::path& archive_path, const EncoderConfig& cfg) {
  return encoder_from_archive(load_archive(archive_path), cfg);
}

// Loads an encoder whose configuration is recorded in the archive metadata.
inline EncoderModel load_encoder(const std::filesystem::path& archive_path) {
  const TensorArchive a = load_archive(archive_path);
  if (!a.metadata.contains("config")) {
    throw FormatError(archive_path.string() + ": archive has no encoder config in its metadata");
  }
  return encoder_from_archive(a, encoder_config_from_json(a.metadata["config"]));
}

// Seeded random weights: projections ~ N(0, 1/fan_in), LayerNorm gains near 1.
inline EncoderModel random_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.require_valid();
  std::mt19937_64 rng(seed);
  auto fill = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
    MatrixF m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(scale * normal_draw(rng));
    return m;
  };
  auto row = [&](Eigen::Index n, double centre, double scale) {
    RowVectorF v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<float>(centre + scale * normal_draw(rng));
    return v;
  };
  const Eigen::Index d = cfg.d_model, f = cfg.d_ff;
  auto linear = [&](Eigen::Index out, Eigen::Index in) {
    return Linear{fill(out, in, 1.0 / std::sqrt(static_cast<double>(in))), row(out, 0.0, 0.02)};
  };
  EncoderModel m;
  m.config = cfg;
  m.conv1 = {fill(d, cfg.n_mels * 3, 1.0 / std::sqrt(3.0 * cfg.n_mels)), row(d, 0.0, 0.02), 3};
  m.conv2 = {fill(d, d * 3, 1.0 / std::sqrt(3.0 * static_cast<double>(d))), row(d, 0.0, 0.02), 3};
  for (int i = 0; i < cfg.n_blocks; ++i) {
    BlockWeights b;
    b.attn_ln = {row(d, 1.0, 0.1), row(d, 0.0, 0.1)};
    b.attn.query = linear(d, d);
    b.attn.key = linear(d, d);
    b.attn.value = linear(d, d);
    b.attn.out = linear(d, d);
    b.mlp_ln = {row(d, 1.0, 0.1), row(d, 0.0, 0.1)};
    b.fc1 = linear(f, d);
    b.fc2 = linear(d, f);
    m.blocks.push_back(std::move(b));
  }
  m.ln_post = {row(d, 1.0, 0.1), row(d, 0.0, 0.1)};
  return m;
}

// Trims or pads a log-mel matrix to exactly max_frames rows. Padding frames
// take the value a silent stretch of audio would have after normalisation:
// max(floor, clip max - 2).
inline MatrixF fit_mel_frames(const FeatureMatrix& mel, int max_frames) {
  const Eigen::Index keep = std::min<Eigen::Index>(mel.frames(), max_frames);
  MatrixF out(max_frames, mel.dims());
  out.topRows(keep) = mel.values.topRows(keep).cast<float>();
  if (keep < max_frames) {
    const double top = mel.values.topRows(keep).maxCoeff();
    const float pad = static_cast<float>(std::max(kLogMelSilence, top - kLogMelDynamicRange / 4.0));
    out.bottomRows(max_frames - keep).setConstant(pad);
  }
  return out;
}

// Log-mel -> conv stem -> + positions -> blocks -> final LayerNorm.
inline Encoding encode(const FeatureMatrix& mel, const EncoderModel& model) {
  if (mel.kind != FeatureKind::LogMel) throw ValidationError("encode expects a LogMel feature matrix");
  if (mel.dims() != model.config.n_mels) {
    throw ShapeError("encode: mel has " + std::to_string(mel.dims()) + " bins, model expects " +
                     std::to_string(model.config.n_mels));
  }
  mel.require_valid();
  const MatrixF input = fit_mel_frames(mel, model.config.max_frames);
  MatrixF x = conv_stem(input, model.conv1, model.conv2);
  x += sinusoidal_positions(static_cast<int>(x.rows()), model.config.d_model);
  for (const auto& b : model.blocks) x = transformer_block(x, b, model.config.n_heads);
  x = layer_norm(x, model.ln_post);
  if (!x.allFinite()) throw NumericError("encode: non-finite output for clip '" + mel.source_clip + "'");
  return Encoding{std::move(x), mel.source_clip, model.config.size};
}

inline std::vector<Encoding> encode_batch(const std::vector<FeatureMatrix>& mels, const EncoderModel& model,
                                          std::size_t workers = 1) {
  std::vector<Encoding> out(mels.size());
  parallel_for(mels.size(), workers, [&](std::size_t i) { out[i] = encode(mels[i], model); });
  return out;
}

}  // namespace svdd
