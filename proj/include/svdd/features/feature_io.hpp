// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/types.hpp"

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>

namespace svdd {

// Feature dump:
//   SVDDFEAT v1 kind=<kind> T=<T> D=<D> frame_rate=<f>\n
//   T*D little-endian float32, row-major (time-major).
inline std::string encode_features(const FeatureMatrix& m) {
  m.require_valid();
  std::string out = "SVDDFEAT v1 kind=" + std::string(feature_kind_name(m.kind)) + " T=" +
                    std::to_string(m.frames()) + " D=" + std::to_string(m.dims()) +
                    " frame_rate=" + format_double(m.frame_rate) + "\n";
  out.reserve(out.size() + static_cast<std::size_t>(m.values.size()) * 4);
  for (Eigen::Index t = 0; t < m.frames(); ++t) {
    for (Eigen::Index d = 0; d < m.dims(); ++d) {
      const float f = static_cast<float>(m.values(t, d));
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
    }
  }
  return out;
}

inline FeatureMatrix decode_features(std::string_view bytes, const std::string& origin = "<memory>") {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw FormatError(origin + ": missing feature header line");
  std::istringstream header{std::string(bytes.substr(0, nl))};
  std::string magic, version;
  header >> magic >> version;
  if (magic != "SVDDFEAT" || version != "v1") throw FormatError(origin + ": bad feature magic/version");
  std::string kind;
  long long t = -1, d = -1;
  double rate = 0.0;
  bool have_rate = false;
  for (std::string tok; header >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError(origin + ": malformed header token '" + tok + "'");
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "kind") kind = val;
      else if (key == "T") t = std::stoll(val);
      else if (key == "D") d = std::stoll(val);
      else if (key == "frame_rate") { rate = std::stod(val); have_rate = true; }
    } catch (const std::exception&) {
      throw FormatError(origin + ": bad header value '" + tok + "'");
    }
  }
  if (kind.empty() || t < 1 || d < 1 || !have_rate) throw FormatError(origin + ": incomplete feature header");
  const std::size_t need = static_cast<std::size_t>(t * d) * 4;
  if (bytes.size() - nl - 1 != need) {
    throw FormatError(origin + ": payload size " + std::to_string(bytes.size() - nl - 1) + " != expected " +
                      std::to_string(need));
  }
  FeatureMatrix m;
  m.kind = parse_feature_kind(kind);
  m.frame_rate = rate;
  m.values.resize(t, d);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (long long i = 0; i < t * d; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[4 * i]) | (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
    float f;
    std::memcpy(&f, &u, sizeof f);
    m.values(i / d, i % d) = f;
  }
  m.require_valid();
  return m;
}

inline void save_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  write_file_atomic(path, encode_features(m));
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  FeatureMatrix m = decode_features(read_file(path), path.string());
  m.source_clip = path.stem().string();
  return m;
}

}  // namespace svdd
