// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/encoder/config.hpp"
#include "svdd/heads/train.hpp"

#include "json.hpp"

#include <cstdlib>
#include <functional>
#include <optional>

namespace svdd {

// The studied front ends, plus W-Custom for small self-made encoders whose
// configuration is stored in the weights archive.
enum class FeatureSystem { WTiny, WBase, WSmall, WMedium, WCustom, MFCC, LFCC, CQCC };

inline constexpr FeatureSystem kAllFeatureSystems[] = {FeatureSystem::WTiny,  FeatureSystem::WBase,
                                                       FeatureSystem::WSmall, FeatureSystem::WMedium,
                                                       FeatureSystem::WCustom, FeatureSystem::MFCC,
                                                       FeatureSystem::LFCC,   FeatureSystem::CQCC};

inline std::string_view feature_system_name(FeatureSystem s) {
  switch (s) {
    case FeatureSystem::WTiny: return "W-Tiny";
    case FeatureSystem::WBase: return "W-Base";
    case FeatureSystem::WSmall: return "W-Small";
    case FeatureSystem::WMedium: return "W-Medium";
    case FeatureSystem::WCustom: return "W-Custom";
    case FeatureSystem::MFCC: return "MFCC";
    case FeatureSystem::LFCC: return "LFCC";
    case FeatureSystem::CQCC: return "CQCC";
  }
  return "?";
}

// Accepts "W-Tiny", "W(Tiny)", "w_tiny", "W(Med.)", "mfcc", ...
inline FeatureSystem parse_feature_system(std::string_view s) {
  std::string key;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "wmed") key = "wmedium";
  for (FeatureSystem f : kAllFeatureSystems) {
    std::string name;
    for (char c : feature_system_name(f)) {
      if (std::isalnum(static_cast<unsigned char>(c))) name += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (name == key) return f;
  }
  throw ValidationError("unknown feature system '" + std::string(s) +
                        "' (expected W-Tiny, W-Base, W-Small, W-Medium, W-Custom, MFCC, LFCC or CQCC)");
}

inline bool is_encoder_system(FeatureSystem s) {
  return s == FeatureSystem::WTiny || s == FeatureSystem::WBase || s == FeatureSystem::WSmall ||
         s == FeatureSystem::WMedium || s == FeatureSystem::WCustom;
}

inline SizeName encoder_size(FeatureSystem s) {
  switch (s) {
    case FeatureSystem::WTiny: return SizeName::Tiny;
    case FeatureSystem::WBase: return SizeName::Base;
    case FeatureSystem::WSmall: return SizeName::Small;
    case FeatureSystem::WMedium: return SizeName::Medium;
    case FeatureSystem::WCustom: return SizeName::Custom;
    default: throw ValidationError(std::string(feature_system_name(s)) + " is not an encoder system");
  }
}

inline std::string canonical_head_name(std::string_view h) {
  const std::string l = to_lower(std::string(h));
  if (l == "cnn") return "CNN";
  if (l == "resnet34" || l == "resnet") return "ResNet34";
  throw ValidationError("unknown head '" + std::string(h) + "' (expected CNN or ResNet34)");
}

// Settings of the classical front ends. Encoder systems use the fixed
// log-mel input of the encoder.
struct FrontendConfig {
  int cepstral_filters = 40;
  int cepstral_coeffs = 20;
  int cqcc_bins_per_octave = 24;
  double cqcc_fmin = 62.5;
  double cqcc_fmax = 8000.0;
  int cqcc_coeffs = 20;
};

inline nlohmann::json to_json(const FrontendConfig& f) {
  return {{"cepstral_filters", f.cepstral_filters},       {"cepstral_coeffs", f.cepstral_coeffs},
          {"cqcc_bins_per_octave", f.cqcc_bins_per_octave}, {"cqcc_fmin", f.cqcc_fmin},
          {"cqcc_fmax", f.cqcc_fmax},                     {"cqcc_coeffs", f.cqcc_coeffs}};
}

inline FrontendConfig frontend_config_from_json(const nlohmann::json& j) {
  FrontendConfig f;
  f.cepstral_filters = j.value("cepstral_filters", f.cepstral_filters);
  f.cepstral_coeffs = j.value("cepstral_coeffs", f.cepstral_coeffs);
  f.cqcc_bins_per_octave = j.value("cqcc_bins_per_octave", f.cqcc_bins_per_octave);
  f.cqcc_fmin = j.value("cqcc_fmin", f.cqcc_fmin);
  f.cqcc_fmax = j.value("cqcc_fmax", f.cqcc_fmax);
  f.cqcc_coeffs = j.value("cqcc_coeffs", f.cqcc_coeffs);
  return f;
}

struct ExperimentConfig {
  Variant variant = Variant::Vocals;
  FeatureSystem feature = FeatureSystem::WTiny;
  std::string head = "CNN";
  std::filesystem::path weights;   // encoder archive (encoder systems only)
  std::filesystem::path manifest;
  std::filesystem::path cache_dir;  // defaults to <out_dir>/cache
  std::filesystem::path out_dir;
  TrainConfig train;
  nlohmann::json head_config = nlohmann::json::object();  // overrides of the head architecture
  FrontendConfig frontend;
  std::uint64_t seed = 0;  // the only source of randomness; copied into train.seed
  std::size_t workers = 1;

  std::filesystem::path feature_cache() const { return cache_dir.empty() ? out_dir / "cache" : cache_dir; }

  void require_valid() const {
    if (manifest.empty()) throw ValidationError("experiment: no manifest given");
    if (!std::filesystem::exists(manifest)) throw ValidationError("experiment: manifest " + manifest.string() + " does not exist");
    if (is_encoder_system(feature)) {
      if (weights.empty()) throw ValidationError("experiment: " + std::string(feature_system_name(feature)) + " needs --weights");
      if (!std::filesystem::exists(weights)) throw ValidationError("experiment: weights " + weights.string() + " do not exist");
    }
    if (out_dir.empty()) throw ValidationError("experiment: no output directory given");
    if (workers < 1) throw ValidationError("experiment: workers must be >= 1");
    canonical_head_name(head);
    train.require_valid();
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"variant", std::string(variant_str(c.variant))},
          {"feature", std::string(feature_system_name(c.feature))},
          {"head", c.head},
          {"paths",
           {{"weights", c.weights.string()},
            {"manifest", c.manifest.string()},
            {"cache", c.cache_dir.string()},
            {"out", c.out_dir.string()}}},
          {"train", to_json(c.train)},
          {"head_config", c.head_config},
          {"frontend", to_json(c.frontend)},
          {"seed", c.seed},
          {"workers", c.workers}};
}

// Relative paths in the document resolve against base_dir.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  auto path = [&](const nlohmann::json& paths, const char* key) -> std::filesystem::path {
    const std::string v = paths.value(key, std::string());
    if (v.empty()) return {};
    const std::filesystem::path p(v);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  try {
    if (!j.is_object()) throw FormatError("experiment config must be a JSON object");
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("feature")) c.feature = parse_feature_system(j.at("feature").get<std::string>());
    if (j.contains("head")) c.head = canonical_head_name(j.at("head").get<std::string>());
    const nlohmann::json paths = j.value("paths", nlohmann::json::object());
    c.weights = path(paths, "weights");
    c.manifest = path(paths, "manifest");
    c.cache_dir = path(paths, "cache");
    c.out_dir = path(paths, "out");
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    c.head_config = j.value("head_config", nlohmann::json::object());
    if (j.contains("frontend")) c.frontend = frontend_config_from_json(j.at("frontend"));
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("experiment config: ") + e.what());
  }
  c.train.seed = c.seed;
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError(what + ": '" + s + "' is not a non-negative integer");
  return v;
}

// SVDD_VARIANT, SVDD_FEATURE, SVDD_HEAD, SVDD_WEIGHTS, SVDD_MANIFEST,
// SVDD_CACHE, SVDD_OUT, SVDD_SEED and SVDD_WORKERS replace the matching
// config fields. Command-line flags are applied after these.
inline void apply_env_overrides(ExperimentConfig& c, const EnvLookup& env = process_env) {
  if (auto v = env("SVDD_VARIANT")) c.variant = parse_variant(*v);
  if (auto v = env("SVDD_FEATURE")) c.feature = parse_feature_system(*v);
  if (auto v = env("SVDD_HEAD")) c.head = canonical_head_name(*v);
  if (auto v = env("SVDD_WEIGHTS")) c.weights = *v;
  if (auto v = env("SVDD_MANIFEST")) c.manifest = *v;
  if (auto v = env("SVDD_CACHE")) c.cache_dir = *v;
  if (auto v = env("SVDD_OUT")) c.out_dir = *v;
  if (auto v = env("SVDD_SEED")) c.seed = c.train.seed = parse_u64(*v, "SVDD_SEED");
  if (auto v = env("SVDD_WORKERS")) c.workers = static_cast<std::size_t>(parse_u64(*v, "SVDD_WORKERS"));
}

}  // namespace svdd
