// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal NCHW layers with hand-written backward passes. Templated on the
// scalar so the same code trains in float and is gradient-checked in double.

#pragma once

#include "svdd/common.hpp"

#include <array>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

namespace svdd::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_stride() const { return static_cast<std::size_t>(c) * plane(); }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * sample_stride(); }
  const T* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * sample_stride(); }
  T& at(int i, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  T at(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
};

// A named tensor of state. Trainable parameters carry a gradient; buffers
// (batch-norm running statistics) do not.
template <class T>
struct Param {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, std::vector<std::int64_t> s, bool train = true) : name(std::move(n)), shape(std::move(s)), trainable(train) {
    std::int64_t k = 1;
    for (auto d : shape) k *= d;
    value.assign(static_cast<std::size_t>(k), T(0));
    if (trainable) grad.assign(value.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v;
  h *= 1099511628211ULL;
}

template <class T>
void fill_normal(Param<T>& p, double stddev, std::mt19937_64& rng) {
  for (auto& v : p.value) v = static_cast<T>(stddev * normal_draw(rng));
}

// ---- convolution -------------------------------------------------------------

template <class T>
class Conv2d {
 public:
  Param<T> weight;  // [out, in, k, k]
  Param<T> bias;    // [out], empty when bias is disabled
  int in_ch, out_ch, k, stride, pad;

  Conv2d(const std::string& name, int in, int out, int kernel, int stride_, int pad_, bool with_bias)
      : weight(name + ".weight", {out, in, kernel, kernel}),
        bias(with_bias ? Param<T>(name + ".bias", {out}) : Param<T>()),
        in_ch(in), out_ch(out), k(kernel), stride(stride_), pad(pad_) {}

  int out_size(int n) const { return (n + 2 * pad - k) / stride + 1; }

  void init(std::mt19937_64& rng) {
    fill_normal(weight, std::sqrt(2.0 / (in_ch * k * k)), rng);  // He normal
    std::fill(bias.value.begin(), bias.value.end(), T(0));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool keep) {
    if (x.c != in_ch) throw ShapeError(weight.name + ": expected " + std::to_string(in_ch) + " input channels");
    const int oh = out_size(x.h), ow = out_size(x.w);
    if (oh < 1 || ow < 1) throw ShapeError(weight.name + ": input too small");
    Tensor4<T> y(x.n, out_ch, oh, ow);
    Mat<T> cols;
    const Eigen::Map<const Mat<T>> W(weight.value.data(), out_ch, in_ch * k * k);
    for (int i = 0; i < x.n; ++i) {
      im2col(x, i, oh, ow, cols);
      Eigen::Map<Mat<T>> yi(y.sample(i), out_ch, oh * ow);
      yi.noalias() = W * cols;
      if (!bias.value.empty()) {
        for (int o = 0; o < out_ch; ++o) yi.row(o).array() += bias.value[static_cast<std::size_t>(o)];
      }
    }
    if (keep) input_ = x;
    return y;
  }

  // Accumulates parameter gradients and returns dL/dx.
  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Tensor4<T>& x = input_;
    const int oh = dy.h, ow = dy.w;
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    const Eigen::Map<const Mat<T>> W(weight.value.data(), out_ch, in_ch * k * k);
    Eigen::Map<Mat<T>> dW(weight.grad.data(), out_ch, in_ch * k * k);
    Mat<T> cols, dcols;
    for (int i = 0; i < x.n; ++i) {
      im2col(x, i, oh, ow, cols);
      const Eigen::Map<const Mat<T>> dyi(dy.sample(i), out_ch, oh * ow);
      dW.noalias() += dyi * cols.transpose();
      if (!bias.value.empty()) {
        for (int o = 0; o < out_ch; ++o) bias.grad[static_cast<std::size_t>(o)] += dyi.row(o).sum();
      }
      dcols.noalias() = W.transpose() * dyi;
      col2im(dcols, i, oh, ow, dx);
    }
    return dx;
  }

  std::vector<Param<T>*> state() {
    if (bias.value.empty()) return {&weight};
    return {&weight, &bias};
  }

 private:
  Tensor4<T> input_;

  void im2col(const Tensor4<T>& x, int i, int oh, int ow, Mat<T>& cols) const {
    cols.setZero(in_ch * k * k, oh * ow);
    for (int c = 0; c < in_ch; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* row = cols.row((c * k + ky) * k + kx).data();
          for (int y = 0; y < oh; ++y) {
            const int sy = y * stride + ky - pad;
            if (sy < 0 || sy >= x.h) continue;
            for (int xo = 0; xo < ow; ++xo) {
              const int sx = xo * stride + kx - pad;
              if (sx >= 0 && sx < x.w) row[y * ow + xo] = x.at(i, c, sy, sx);
            }
          }
        }
      }
    }
  }

  void col2im(const Mat<T>& dcols, int i, int oh, int ow, Tensor4<T>& dx) const {
    for (int c = 0; c < in_ch; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* row = dcols.row((c * k + ky) * k + kx).data();
          for (int y = 0; y < oh; ++y) {
            const int sy = y * stride + ky - pad;
            if (sy < 0 || sy >= dx.h) continue;
            for (int xo = 0; xo < ow; ++xo) {
              const int sx = xo * stride + kx - pad;
              if (sx >= 0 && sx < dx.w) dx.at(i, c, sy, sx) += row[y * ow + xo];
            }
          }
        }
      }
    }
  }
};

// ---- batch normalisation -------------------------------------------------------

template <class T>
class BatchNorm2d {
 public:
  Param<T> gamma, beta, running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm2d(const std::string& name, int channels)
      : gamma(name + ".weight", {channels}),
        beta(name + ".bias", {channels}),
        running_mean(name + ".running_mean", {channels}, false),
        running_var(name + ".running_var", {channels}, false) {
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    std::fill(running_var.value.begin(), running_var.value.end(), T(1));
  }

  // Training mode normalises with the batch statistics and updates the
  // running estimates; inference mode uses the running estimates.
  Tensor4<T> forward(const Tensor4<T>& x, bool train) {
    const int C = x.c;
    const std::size_t plane = x.plane();
    const double m = static_cast<double>(x.n) * static_cast<double>(plane);
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    if (train) {
      xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
      inv_std_.assign(static_cast<std::size_t>(C), T(0));
    }
    for (int c = 0; c < C; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      double mean, var;
      if (train) {
        double s = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + cu * plane;
          for (std::size_t j = 0; j < plane; ++j) s += static_cast<double>(p[j]);
        }
        mean = s / m;
        double v = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + cu * plane;
          for (std::size_t j = 0; j < plane; ++j) v += (static_cast<double>(p[j]) - mean) * (static_cast<double>(p[j]) - mean);
        }
        var = v / m;
        const double unbiased = m > 1 ? v / (m - 1) : var;
        running_mean.value[cu] = static_cast<T>((1 - momentum) * running_mean.value[cu] + momentum * mean);
        running_var.value[cu] = static_cast<T>((1 - momentum) * running_var.value[cu] + momentum * unbiased);
      } else {
        mean = static_cast<double>(running_mean.value[cu]);
        var = static_cast<double>(running_var.value[cu]);
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
      const T mu = static_cast<T>(mean);
      if (train) inv_std_[cu] = inv;
      for (int i = 0; i < x.n; ++i) {
        const T* p = x.sample(i) + cu * plane;
        T* q = y.sample(i) + cu * plane;
        T* h = train ? xhat_.sample(i) + cu * plane : nullptr;
        for (std::size_t j = 0; j < plane; ++j) {
          const T xh = (p[j] - mu) * inv;
          if (h) h[j] = xh;
          q[j] = gamma.value[cu] * xh + beta.value[cu];
        }
      }
    }
    return y;
  }

  // Backward through the training-mode (batch statistics) forward.
  Tensor4<T> backward(const Tensor4<T>& dy) {
    const std::size_t plane = dy.plane();
    const T m = static_cast<T>(static_cast<double>(dy.n) * static_cast<double>(plane));
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    for (int c = 0; c < dy.c; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      T sum_dy = 0, sum_dy_xh = 0;
      for (int i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + cu * plane;
        const T* h = xhat_.sample(i) + cu * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          sum_dy += g[j];
          sum_dy_xh += g[j] * h[j];
        }
      }
      gamma.grad[cu] += sum_dy_xh;
      beta.grad[cu] += sum_dy;
      const T scale = gamma.value[cu] * inv_std_[cu] / m;
      for (int i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + cu * plane;
        const T* h = xhat_.sample(i) + cu * plane;
        T* d = dx.sample(i) + cu * plane;
        for (std::size_t j = 0; j < plane; ++j) d[j] = scale * (m * g[j] - sum_dy - h[j] * sum_dy_xh);
      }
    }
    return dx;
  }

  std::vector<Param<T>*> state() { return {&gamma, &beta, &running_mean, &running_var}; }

 private:
  Tensor4<T> xhat_;
  std::vector<T> inv_std_;
};

// ---- pointwise and pooling ---------------------------------------------------

template <class T>
class Relu {
 public:
  Tensor4<T> forward(Tensor4<T> x, bool keep) {
    for (auto& v : x.data) v = v > T(0) ? v : T(0);
    if (keep) out_ = x;
    return x;
  }
  Tensor4<T> backward(Tensor4<T> dy) const {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(out_.data[i] > T(0))) dy.data[i] = T(0);
    }
    return dy;
  }
  // Folds the on/off pattern of the last training-mode forward into h.
  void signature(std::uint64_t& h) const {
    for (T v : out_.data) hash_mix(h, v > T(0) ? 1u : 0u);
  }

 private:
  Tensor4<T> out_;
};

template <class T>
class MaxPool2d {
 public:
  int k, stride, pad;
  MaxPool2d(int kernel, int stride_, int pad_ = 0) : k(kernel), stride(stride_), pad(pad_) {}

  int out_size(int n) const { return (n + 2 * pad - k) / stride + 1; }

  Tensor4<T> forward(const Tensor4<T>& x, bool keep) {
    const int oh = out_size(x.h), ow = out_size(x.w);
    if (oh < 1 || ow < 1) throw ShapeError("max pool: input too small");
    Tensor4<T> y(x.n, x.c, oh, ow);
    if (keep) {
      argmax_.assign(y.size(), 0);
      in_shape_ = {x.n, x.c, x.h, x.w};
    }
    std::size_t o = 0;
    for (int i = 0; i < x.n; ++i) {
      for (int c = 0; c < x.c; ++c) {
        for (int yy = 0; yy < oh; ++yy) {
          for (int xx = 0; xx < ow; ++xx, ++o) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t where = 0;
            for (int ky = 0; ky < k; ++ky) {
              const int sy = yy * stride + ky - pad;
              if (sy < 0 || sy >= x.h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int sx = xx * stride + kx - pad;
                if (sx < 0 || sx >= x.w) continue;
                const std::size_t idx = ((static_cast<std::size_t>(i) * x.c + c) * x.h + sy) * x.w + sx;
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  where = idx;
                }
              }
            }
            y.data[o] = best;
            if (keep) argmax_[o] = where;
          }
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) const {
    Tensor4<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
    return dx;
  }
  void signature(std::uint64_t& h) const {
    for (std::size_t a : argmax_) hash_mix(h, a);
  }

 private:
  std::vector<std::size_t> argmax_;
  std::array<int, 4> in_shape_{};
};

template <class T>
inline Tensor4<T> global_avg_pool(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, 1, 1);
  const std::size_t plane = x.plane();
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.sample(i) + static_cast<std::size_t>(c) * plane;
      T s = 0;
      for (std::size_t j = 0; j < plane; ++j) s += p[j];
      y.at(i, c, 0, 0) = s / static_cast<T>(plane);
    }
  }
  return y;
}

template <class T>
inline Tensor4<T> global_avg_pool_backward(const Tensor4<T>& dy, int h, int w) {
  Tensor4<T> dx(dy.n, dy.c, h, w);
  const T inv = T(1) / static_cast<T>(h * w);
  for (int i = 0; i < dy.n; ++i) {
    for (int c = 0; c < dy.c; ++c) {
      T* p = dx.sample(i) + static_cast<std::size_t>(c) * dx.plane();
      std::fill(p, p + dx.plane(), dy.at(i, c, 0, 0) * inv);
    }
  }
  return dx;
}

// Fully connected layer on the flattened sample (c * h * w features).
template <class T>
class Dense {
 public:
  Param<T> weight;  // [out, in]
  Param<T> bias;    // [out]
  int in_features, out_features;

  Dense(const std::string& name, int in, int out)
      : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_features(in), out_features(out) {}

  void init(std::mt19937_64& rng) {
    fill_normal(weight, 1.0 / std::sqrt(static_cast<double>(in_features)), rng);
    std::fill(bias.value.begin(), bias.value.end(), T(0));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool keep) {
    if (static_cast<int>(x.sample_stride()) != in_features) {
      throw ShapeError(weight.name + ": expected " + std::to_string(in_features) + " input features, got " +
                       std::to_string(x.sample_stride()));
    }
    const Eigen::Map<const Mat<T>> X(x.data.data(), x.n, in_features);
    const Eigen::Map<const Mat<T>> W(weight.value.data(), out_features, in_features);
    Tensor4<T> y(x.n, out_features, 1, 1);
    Eigen::Map<Mat<T>> Y(y.data.data(), x.n, out_features);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < x.n; ++i) {
      for (int o = 0; o < out_features; ++o) Y(i, o) += bias.value[static_cast<std::size_t>(o)];
    }
    if (keep) input_ = x;
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Eigen::Map<const Mat<T>> X(input_.data.data(), input_.n, in_features);
    const Eigen::Map<const Mat<T>> W(weight.value.data(), out_features, in_features);
    const Eigen::Map<const Mat<T>> G(dy.data.data(), dy.n, out_features);
    Eigen::Map<Mat<T>> dW(weight.grad.data(), out_features, in_features);
    dW.noalias() += G.transpose() * X;
    for (int i = 0; i < dy.n; ++i) {
      for (int o = 0; o < out_features; ++o) bias.grad[static_cast<std::size_t>(o)] += G(i, o);
    }
    Tensor4<T> dx(input_.n, input_.c, input_.h, input_.w);
    Eigen::Map<Mat<T>> DX(dx.data.data(), input_.n, in_features);
    DX.noalias() = G * W;
    return dx;
  }

  std::vector<Param<T>*> state() { return {&weight, &bias}; }

 private:
  Tensor4<T> input_;
};

// Mean two-class cross-entropy over the batch; writes dL/dlogits.
template <class T>
inline double softmax_cross_entropy(const Tensor4<T>& logits, const std::vector<int>& labels,
                                    std::type_identity_t<Tensor4<T>>* grad) {
  const int n = logits.n, k = logits.c;
  double loss = 0.0;
  if (grad) *grad = Tensor4<T>(n, k, 1, 1);
  for (int i = 0; i < n; ++i) {
    const T* z = logits.sample(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(z[j]) - mx);
    const int y = labels[static_cast<std::size_t>(i)];
    loss += -(static_cast<double>(z[y]) - mx - std::log(denom));
    if (grad) {
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(static_cast<double>(z[j]) - mx) / denom;
        grad->at(i, j, 0, 0) = static_cast<T>((p - (j == y ? 1.0 : 0.0)) / n);
      }
    }
  }
  return loss / n;
}

}  // namespace svdd::nn
