// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include <cmath>

namespace svdd {

inline constexpr float kLayerNormEps = 1e-5f;

struct LayerNormParams {
  RowVectorF gain;
  RowVectorF bias;
};

// Affine map y = x W^T + b with W stored [out, in].
struct Linear {
  MatrixF weight;
  RowVectorF bias;

  MatrixF apply(const MatrixF& x) const {
    if (x.cols() != weight.cols()) throw ShapeError("linear: input width does not match weight");
    MatrixF y = x * weight.transpose();
    y.rowwise() += bias;
    return y;
  }
};

struct AttentionWeights {
  Linear query, key, value, out;
};

struct BlockWeights {
  LayerNormParams attn_ln;
  AttentionWeights attn;
  LayerNormParams mlp_ln;
  Linear fc1;  // d_model -> d_ff
  Linear fc2;  // d_ff -> d_model
};

// 1-D convolution kernel stored [out, in * width] with input-channel-major
// columns (column c * width + j multiplies channel c at tap j).
struct Conv1dWeights {
  MatrixF kernel;
  RowVectorF bias;
  int width = 3;
};

// Row-wise normalisation to zero mean and unit (biased) variance, then gain
// and bias.
inline MatrixF layer_norm(const MatrixF& x, const LayerNormParams& p, float eps = kLayerNormEps) {
  if (p.gain.size() != x.cols() || p.bias.size() != x.cols()) throw ShapeError("layer_norm: parameter width mismatch");
  MatrixF y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const float mean = x.row(r).mean();
    const float var = (x.row(r).array() - mean).square().mean();
    const float inv = 1.0f / std::sqrt(var + eps);
    y.row(r) = (((x.row(r).array() - mean) * inv) * p.gain.array() + p.bias.array()).matrix();
  }
  return y;
}

// Exact (erf) GELU.
inline float gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(M_SQRT1_2))); }

inline void softmax_rows(MatrixF& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const float m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

// softmax(Q K^T / sqrt(d_k)) V.
inline MatrixF scaled_dot_attention(const MatrixF& q, const MatrixF& k, const MatrixF& v) {
  if (q.cols() != k.cols()) throw ShapeError("attention: Q and K must share d_k");
  if (k.rows() != v.rows()) throw ShapeError("attention: K and V must have the same length");
  if (q.cols() == 0 || k.rows() == 0) throw ShapeError("attention: empty input");
  MatrixF scores = (q * k.transpose()) / std::sqrt(static_cast<float>(q.cols()));
  softmax_rows(scores);
  return scores * v;
}

// Projects to per-head Q/K/V slices, attends per head, concatenates the head
// outputs and applies the output projection.
inline MatrixF multi_head_self_attention(const MatrixF& x, const AttentionWeights& w, int n_heads) {
  const Eigen::Index d = x.cols();
  if (n_heads < 1 || d % n_heads != 0) throw ShapeError("attention: d_model must be divisible by n_heads");
  const MatrixF q = w.query.apply(x);
  const MatrixF k = w.key.apply(x);
  const MatrixF v = w.value.apply(x);
  const Eigen::Index hd = d / n_heads;
  MatrixF concat(x.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    concat.middleCols(h * hd, hd) =
        scaled_dot_attention(q.middleCols(h * hd, hd), k.middleCols(h * hd, hd), v.middleCols(h * hd, hd));
  }
  return w.out.apply(concat);
}

inline MatrixF feed_forward(const MatrixF& x, const Linear& fc1, const Linear& fc2) {
  MatrixF h = fc1.apply(x);
  h = h.unaryExpr([](float v) { return gelu(v); });
  return fc2.apply(h);
}

// Pre-norm residual block:
//   x = x + MHSA(LN(x));  x = x + FFN(LN(x))
inline MatrixF transformer_block(const MatrixF& x, const BlockWeights& w, int n_heads) {
  if (!x.allFinite()) throw NumericError("transformer block: non-finite input");
  MatrixF y = x + multi_head_self_attention(layer_norm(x, w.attn_ln), w.attn, n_heads);
  y += feed_forward(layer_norm(y, w.mlp_ln), w.fc1, w.fc2);
  if (!y.allFinite()) throw NumericError("transformer block: non-finite activation (corrupted weights?)");
  return y;
}

// x: T x C_in (time-major). Zero padding of `padding` frames on both sides.
inline MatrixF conv1d(const MatrixF& x, const Conv1dWeights& w, int stride, int padding) {
  const Eigen::Index c_in = x.cols();
  if (w.kernel.cols() != c_in * w.width) throw ShapeError("conv1d: kernel does not match input channels");
  const Eigen::Index t_in = x.rows();
  const Eigen::Index t_out = (t_in + 2 * padding - w.width) / stride + 1;
  if (t_out < 1) throw ShapeError("conv1d: input too short");
  MatrixF patches = MatrixF::Zero(t_out, c_in * w.width);
  for (Eigen::Index t = 0; t < t_out; ++t) {
    for (int j = 0; j < w.width; ++j) {
      const Eigen::Index src = t * stride + j - padding;
      if (src < 0 || src >= t_in) continue;
      for (Eigen::Index c = 0; c < c_in; ++c) patches(t, c * w.width + j) = x(src, c);
    }
  }
  MatrixF y = patches * w.kernel.transpose();
  y.rowwise() += w.bias;
  return y;
}

// conv(k=3, s=1) -> GELU -> conv(k=3, s=2) -> GELU, both padded by one frame.
// T frames in, ceil(T / 2) frames out.
inline MatrixF conv_stem(const MatrixF& mel, const Conv1dWeights& conv1, const Conv1dWeights& conv2) {
  MatrixF h = conv1d(mel, conv1, 1, 1).unaryExpr([](float v) { return gelu(v); });
  return conv1d(h, conv2, 2, 1).unaryExpr([](float v) { return gelu(v); });
}

// Sinusoidal position table, T x d. Column i < d/2 holds sin(t * w_i) and
// column d/2 + i holds cos(t * w_i), with w_i = 10000^(-i / (d/2 - 1)), so
// wavelengths run geometrically from 2*pi to 10000 * 2*pi.
inline MatrixF sinusoidal_positions(int length, int d) {
  if (d < 2 || d % 2 != 0) throw ValidationError("sinusoidal positions need an even width >= 2");
  const int half = d / 2;
  const double inc = half > 1 ? std::log(10000.0) / (half - 1) : 0.0;
  MatrixF p(length, d);
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < half; ++i) {
      const double angle = t * std::exp(-inc * i);
      p(t, i) = static_cast<float>(std::sin(angle));
      p(t, half + i) = static_cast<float>(std::cos(angle));
    }
  }
  return p;
}

}  // namespace svdd
