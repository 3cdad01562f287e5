// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Nested-loop forward pass of the CNN head, used as the reference for the
// im2col implementation. Test-only.

#pragma once

#include "svdd/heads/models.hpp"

#include <vector>

namespace svdd::oracle {

using Volume = std::vector<std::vector<std::vector<double>>>;  // [c][y][x]

template <class T>
Volume conv_same(const Volume& in, const nn::Param<T>& weight, const nn::Param<T>& bias) {
  const int out_c = static_cast<int>(weight.shape[0]), in_c = static_cast<int>(weight.shape[1]);
  const int k = static_cast<int>(weight.shape[2]), pad = k / 2;
  const int H = static_cast<int>(in[0].size()), W = static_cast<int>(in[0][0].size());
  Volume out(static_cast<std::size_t>(out_c), std::vector<std::vector<double>>(H, std::vector<double>(W, 0.0)));
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = static_cast<double>(bias.value[static_cast<std::size_t>(o)]);
        for (int c = 0; c < in_c; ++c) {
          for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
              const int sy = y + dy - pad, sx = x + dx - pad;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              acc += static_cast<double>(weight.value[static_cast<std::size_t>(((o * in_c + c) * k + dy) * k + dx)]) *
                     in[static_cast<std::size_t>(c)][static_cast<std::size_t>(sy)][static_cast<std::size_t>(sx)];
            }
          }
        }
        out[static_cast<std::size_t>(o)][static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = std::max(acc, 0.0);
      }
    }
  }
  return out;
}

inline Volume max_pool2(const Volume& in) {
  Volume out;
  for (const auto& plane : in) {
    std::vector<std::vector<double>> p(plane.size() / 2, std::vector<double>(plane[0].size() / 2));
    for (std::size_t y = 0; y < p.size(); ++y) {
      for (std::size_t x = 0; x < p[0].size(); ++x) {
        p[y][x] = std::max({plane[2 * y][2 * x], plane[2 * y][2 * x + 1], plane[2 * y + 1][2 * x], plane[2 * y + 1][2 * x + 1]});
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Logits of a CNN head for one H x W input.
template <class T>
std::vector<double> cnn_logits(nn::CnnHead<T>& head, const std::vector<std::vector<double>>& input) {
  const auto st = head.state();  // conv1.w, conv1.b, conv2.w, conv2.b, fc.w, fc.b
  Volume v = {input};
  v = max_pool2(conv_same(v, *st[0], *st[1]));
  v = max_pool2(conv_same(v, *st[2], *st[3]));
  std::vector<double> flat;
  for (const auto& plane : v)
    for (const auto& row : plane)
      for (double x : row) flat.push_back(x);
  std::vector<double> logits(2);
  for (std::size_t o = 0; o < 2; ++o) {
    double acc = static_cast<double>(st[5]->value[o]);
    for (std::size_t i = 0; i < flat.size(); ++i) acc += static_cast<double>(st[4]->value[o * flat.size() + i]) * flat[i];
    logits[o] = acc;
  }
  return logits;
}

}  // namespace svdd::oracle
