// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"

#include "json.hpp"

#include <optional>
#include <set>
#include <unordered_map>

namespace svdd {

struct ClipRecord {
  std::string clip_id;
  std::string path;  // as written in the manifest; relative paths resolve against the manifest directory
  Label label = Label::Bonafide;
  std::string singer_id;
  std::string language;
  Partition partition = Partition::Train;
  Variant variant = Variant::Vocals;
  std::optional<std::string> codec;
  bool audio_missing = false;  // set by load_manifest, not serialised

  bool operator==(const ClipRecord& o) const {
    return clip_id == o.clip_id && path == o.path && label == o.label && singer_id == o.singer_id &&
           language == o.language && partition == o.partition && variant == o.variant && codec == o.codec;
  }
};

struct ClassCounts {
  std::size_t bonafide = 0;
  std::size_t deepfake = 0;

  std::size_t total() const { return bonafide + deepfake; }
  bool operator==(const ClassCounts&) const = default;
};

// Per-partition clip counts of the full dataset, identical for the vocals and
// mixture variants.
inline ClassCounts reference_counts(Partition p) {
  switch (p) {
    case Partition::Train: return {5251, 4519};
    case Partition::Val: return {1089, 543};
    case Partition::T01: return {370, 1208};
    case Partition::T02: return {1685, 1006};
    case Partition::T03: return {6740, 4024};
    case Partition::T04: return {353, 166};
  }
  return {};
}

inline constexpr int kT03CodecCount = 4;

inline constexpr std::string_view kManifestHeader = "clip_id,path,label,singer_id,language,partition,variant,codec";

struct Manifest {
  std::vector<ClipRecord> records;
  std::filesystem::path base_dir;  // directory relative paths are resolved against

  std::filesystem::path audio_path(const ClipRecord& r) const {
    const std::filesystem::path p(r.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::vector<ClipRecord> select(Partition p) const {
    std::vector<ClipRecord> out;
    for (const auto& r : records) {
      if (r.partition == p) out.push_back(r);
    }
    return out;
  }

  ClassCounts counts(Partition p, std::optional<Variant> v = std::nullopt) const {
    ClassCounts c;
    for (const auto& r : records) {
      if (r.partition != p || (v && r.variant != *v)) continue;
      (r.label == Label::Bonafide ? c.bonafide : c.deepfake)++;
    }
    return c;
  }

  std::vector<std::string> missing_audio() const {
    std::vector<std::string> ids;
    for (const auto& r : records) {
      if (r.audio_missing) ids.push_back(r.clip_id);
    }
    return ids;
  }
};

inline void require_csv_safe(const std::string& field, std::string_view what, const std::string& clip_id) {
  if (field.find_first_of(",\r\n") != std::string::npos) {
    throw ValidationError("clip '" + clip_id + "': " + std::string(what) + " contains a comma or newline");
  }
}

inline std::string encode_manifest(const std::vector<ClipRecord>& records) {
  std::string out(kManifestHeader);
  out += "\n";
  for (const auto& r : records) {
    if (r.clip_id.empty()) throw ValidationError("manifest record with empty clip_id");
    require_csv_safe(r.clip_id, "clip_id", r.clip_id);
    require_csv_safe(r.path, "path", r.clip_id);
    require_csv_safe(r.singer_id, "singer_id", r.clip_id);
    require_csv_safe(r.language, "language", r.clip_id);
    if (r.codec) require_csv_safe(*r.codec, "codec", r.clip_id);
    out += r.clip_id + "," + r.path + "," + std::string(label_str(r.label)) + "," + r.singer_id + "," + r.language +
           "," + std::string(partition_str(r.partition)) + "," + std::string(variant_str(r.variant)) + "," +
           r.codec.value_or("") + "\n";
  }
  return out;
}

// Parses manifest text. Does not touch the filesystem.
inline std::vector<ClipRecord> decode_manifest(const std::string& text, const std::string& origin = "<manifest>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(origin + ":1: empty manifest, expected header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw FormatError(origin + ":1: expected header " + std::string(kManifestHeader));
  }
  std::vector<ClipRecord> records;
  std::unordered_map<std::string, int> seen;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (cells.size() != 8) {
      throw FormatError(where + "expected 8 fields, found " + std::to_string(cells.size()));
    }
    ClipRecord r;
    r.clip_id = cells[0];
    r.path = cells[1];
    if (r.clip_id.empty()) throw FormatError(where + "empty clip_id");
    if (r.path.empty()) throw FormatError(where + "empty path for clip '" + r.clip_id + "'");
    try {
      r.label = parse_label(cells[2]);
      r.partition = parse_partition(cells[5]);
      r.variant = parse_variant(cells[6]);
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
    r.singer_id = cells[3];
    r.language = cells[4];
    if (!cells[7].empty()) r.codec = cells[7];
    if (auto [it, fresh] = seen.emplace(r.clip_id, lineno); !fresh) {
      throw FormatError(where + "duplicate clip_id '" + r.clip_id + "' (first on line " + std::to_string(it->second) +
                        ")");
    }
    records.push_back(std::move(r));
  }
  return records;
}

// Records whose audio file does not exist are kept and flagged.
inline Manifest load_manifest(const std::filesystem::path& path) {
  Manifest m;
  m.records = decode_manifest(read_file(path), path.string());
  m.base_dir = path.parent_path();
  for (auto& r : m.records) r.audio_missing = !std::filesystem::exists(m.audio_path(r));
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
  write_file_atomic(path, encode_manifest(records));
}

// ---- reference validation -------------------------------------------------------

struct Violation {
  std::string kind;  // "count", "codec-expansion", "seen-singer", "unseen-singer"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(std::string_view kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
  }
};

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"kind", x.kind}, {"message", x.message}});
  return {{"ok", r.ok()}, {"violations", v}};
}

namespace detail {

inline std::string counts_str(const ClassCounts& c) {
  return std::to_string(c.bonafide) + "/" + std::to_string(c.deepfake);
}

inline std::set<std::string> singers(const std::vector<ClipRecord>& records, Partition p,
                                     std::optional<Variant> v) {
  std::set<std::string> out;
  for (const auto& r : records) {
    if (r.partition == p && (!v || r.variant == *v)) out.insert(r.singer_id);
  }
  return out;
}

}  // namespace detail

// Compares partition counts with the full-dataset reference and checks the
// singer structure of the test conditions: T01 singers all appear in Train,
// no T02 singer appears in Train, and T03 holds four codec copies of T02.
// Each variant present is checked on its own; an empty manifest is checked as
// a vocals manifest.
inline ValidationReport validate_against_reference(const Manifest& m) {
  std::vector<Variant> variants;
  for (Variant v : {Variant::Vocals, Variant::Mixture}) {
    if (std::any_of(m.records.begin(), m.records.end(), [&](const ClipRecord& r) { return r.variant == v; })) {
      variants.push_back(v);
    }
  }
  if (variants.empty()) variants.push_back(Variant::Vocals);
  const bool tag = variants.size() > 1;

  ValidationReport rep;
  for (Variant v : variants) {
    const std::string prefix = tag ? std::string(variant_str(v)) + " " : "";
    for (Partition p : kAllPartitions) {
      const ClassCounts got = m.counts(p, v), want = reference_counts(p);
      if (got != want) {
        rep.violations.push_back({"count", prefix + std::string(partition_str(p)) + ": expected bonafide/deepfake " +
                                               detail::counts_str(want) + ", found " + detail::counts_str(got)});
      }
    }
    const ClassCounts t02 = m.counts(Partition::T02, v), t03 = m.counts(Partition::T03, v);
    if (t03.bonafide != kT03CodecCount * t02.bonafide || t03.deepfake != kT03CodecCount * t02.deepfake) {
      rep.violations.push_back({"codec-expansion", prefix + "T03 " + detail::counts_str(t03) + " is not " +
                                                       std::to_string(kT03CodecCount) + " x T02 " +
                                                       detail::counts_str(t02)});
    }
    const auto train = detail::singers(m.records, Partition::Train, v);
    for (const auto& s : detail::singers(m.records, Partition::T01, v)) {
      if (!train.count(s)) {
        rep.violations.push_back({"seen-singer", prefix + "seen-singer violation: T01 singer '" + s +
                                                     "' does not appear in Train"});
      }
    }
    for (const auto& s : detail::singers(m.records, Partition::T02, v)) {
      if (train.count(s)) {
        rep.violations.push_back({"unseen-singer", prefix + "unseen-singer violation: T02 singer '" + s +
                                                       "' also appears in Train"});
      }
    }
  }
  return rep;
}

}  // namespace svdd
