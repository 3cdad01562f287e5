// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace svdd {

enum class SizeName { Tiny, Base, Small, Medium, Custom };

inline std::string_view size_name_str(SizeName s) {
  switch (s) {
    case SizeName::Tiny: return "tiny";
    case SizeName::Base: return "base";
    case SizeName::Small: return "small";
    case SizeName::Medium: return "medium";
    case SizeName::Custom: return "custom";
  }
  return "?";
}

inline SizeName parse_size_name(std::string_view s) {
  const std::string l = to_lower(std::string(s));
  for (SizeName n : {SizeName::Tiny, SizeName::Base, SizeName::Small, SizeName::Medium, SizeName::Custom}) {
    if (size_name_str(n) == l) return n;
  }
  throw FormatError("unknown encoder size '" + std::string(s) + "'");
}

struct EncoderConfig {
  SizeName size = SizeName::Tiny;
  int n_blocks = 4;
  int d_model = 384;
  int n_heads = 6;
  int d_ff = 1536;
  int n_mels = 80;
  int max_frames = 3000;

  int head_dim() const { return d_model / n_heads; }
  // Output frames after the stride-2 stem.
  int output_frames() const { return (max_frames + 1) / 2; }

  void require_valid() const {
    if (n_blocks < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || n_mels < 1 || max_frames < 1) {
      throw ValidationError("encoder config: all dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw ValidationError("encoder config: d_model must be divisible by n_heads");
    if (d_model % 2 != 0) throw ValidationError("encoder config: d_model must be even (sinusoidal positions)");
    const int expected_blocks = size == SizeName::Tiny ? 4 : size == SizeName::Base ? 6
                              : size == SizeName::Small ? 12 : size == SizeName::Medium ? 24 : n_blocks;
    if (n_blocks != expected_blocks) {
      throw ValidationError("encoder config: size " + std::string(size_name_str(size)) + " requires " +
                            std::to_string(expected_blocks) + " blocks");
    }
  }

  bool operator==(const EncoderConfig&) const = default;
};

// The four released sizes: 4/6/12/24 blocks, widths 384/512/768/1024,
// 64-dimensional heads, feed-forward width 4 x d_model, 80 mel bins, 30 s.
inline EncoderConfig encoder_config(SizeName size) {
  EncoderConfig c;
  c.size = size;
  switch (size) {
    case SizeName::Tiny: c.n_blocks = 4; c.d_model = 384; c.n_heads = 6; break;
    case SizeName::Base: c.n_blocks = 6; c.d_model = 512; c.n_heads = 8; break;
    case SizeName::Small: c.n_blocks = 12; c.d_model = 768; c.n_heads = 12; break;
    case SizeName::Medium: c.n_blocks = 24; c.d_model = 1024; c.n_heads = 16; break;
    case SizeName::Custom: throw ValidationError("custom encoder sizes have no preset");
  }
  c.d_ff = 4 * c.d_model;
  return c;
}

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"size", size_name_str(c.size)}, {"n_blocks", c.n_blocks}, {"d_model", c.d_model},
          {"n_heads", c.n_heads},          {"d_ff", c.d_ff},         {"n_mels", c.n_mels},
          {"max_frames", c.max_frames}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.size = parse_size_name(j.at("size").get<std::string>());
    c.n_blocks = j.at("n_blocks").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.n_mels = j.at("n_mels").get<int>();
    c.max_frames = j.at("max_frames").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("encoder config: ") + e.what());
  }
  c.require_valid();
  return c;
}

struct TensorSpec {
  std::string name;
  std::vector<std::int64_t> shape;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

inline std::string block_prefix(int i) { return "encoder.blocks." + std::to_string(i) + "."; }

// Every tensor an encoder of this configuration needs, with exact shapes.
// Linear weights are [out, in]; conv kernels are [out, in, width].
inline std::vector<TensorSpec> encoder_layout(const EncoderConfig& c) {
  using V = std::vector<std::int64_t>;
  const std::int64_t d = c.d_model, f = c.d_ff;
  std::vector<TensorSpec> t;
  t.push_back({"encoder.conv1.weight", V{d, c.n_mels, 3}});
  t.push_back({"encoder.conv1.bias", V{d}});
  t.push_back({"encoder.conv2.weight", V{d, d, 3}});
  t.push_back({"encoder.conv2.bias", V{d}});
  for (int i = 0; i < c.n_blocks; ++i) {
    const std::string p = block_prefix(i);
    t.push_back({p + "attn_ln.weight", V{d}});
    t.push_back({p + "attn_ln.bias", V{d}});
    for (const char* proj : {"query", "key", "value", "out"}) {
      t.push_back({p + "attn." + proj + ".weight", V{d, d}});
      t.push_back({p + "attn." + proj + ".bias", V{d}});
    }
    t.push_back({p + "mlp_ln.weight", V{d}});
    t.push_back({p + "mlp_ln.bias", V{d}});
    t.push_back({p + "mlp.0.weight", V{f, d}});
    t.push_back({p + "mlp.0.bias", V{f}});
    t.push_back({p + "mlp.2.weight", V{d, f}});
    t.push_back({p + "mlp.2.bias", V{d}});
  }
  t.push_back({"encoder.ln_post.weight", V{d}});
  t.push_back({"encoder.ln_post.bias", V{d}});
  return t;
}

inline std::int64_t parameter_count(const std::vector<TensorSpec>& layout) {
  std::int64_t n = 0;
  for (const auto& s : layout) n += s.numel();
  return n;
}

inline nlohmann::json layout_manifest_json(const EncoderConfig& c) {
  nlohmann::json tensors = nlohmann::json::array();
  const auto layout = encoder_layout(c);
  for (const auto& s : layout) tensors.push_back({{"name", s.name}, {"shape", s.shape}});
  return {{"config", to_json(c)}, {"parameter_count", parameter_count(layout)}, {"tensors", tensors}};
}

}  // namespace svdd
