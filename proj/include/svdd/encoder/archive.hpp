// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"
#include "svdd/encoder/config.hpp"

#include "json.hpp"

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace svdd {

// Portable tensor archive, version 1:
//
//   "SVDDTNSR"                 8-byte magic
//   u32 version (= 1)          little-endian
//   u32 header_length
//   header                     UTF-8 JSON: name -> {dtype: "f32", shape, offset,
//                              byte_length, crc32}; optional "__metadata__"
//   blob                       little-endian float32, row-major
//   u32 crc32(blob)
//
// Offsets are relative to the start of the blob.
inline constexpr char kArchiveMagic[8] = {'S', 'V', 'D', 'D', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kArchiveVersion = 1;

struct NamedTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

struct TensorArchive {
  std::map<std::string, NamedTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();
};

// Raised for any structural or integrity problem in an archive; the message
// names the offending tensor when there is one.
class ArchiveError : public FormatError {
 public:
  ArchiveError(const std::string& tensor, const std::string& what)
      : FormatError(tensor.empty() ? what : "tensor '" + tensor + "': " + what), tensor_(tensor) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

inline std::uint32_t crc32_of(const void* data, std::size_t len) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = static_cast<const Bytef*>(data);
  while (len > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace detail {

inline void append_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t read_le32(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return static_cast<std::uint32_t>(u[0]) | (static_cast<std::uint32_t>(u[1]) << 8) |
         (static_cast<std::uint32_t>(u[2]) << 16) | (static_cast<std::uint32_t>(u[3]) << 24);
}

inline void append_floats_le(std::string& out, const std::vector<float>& v) {
  for (float f : v) {
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    append_le32(out, u);
  }
}

}  // namespace detail

inline std::string encode_archive(const TensorArchive& archive) {
  nlohmann::json header = nlohmann::json::object();
  if (!archive.metadata.empty()) header["__metadata__"] = archive.metadata;
  std::string blob;
  for (const auto& [name, t] : archive.tensors) {
    if (name == "__metadata__") throw ArchiveError(name, "reserved tensor name");
    if (static_cast<std::int64_t>(t.data.size()) != t.numel()) {
      throw ArchiveError(name, "data length does not match shape");
    }
    const std::size_t offset = blob.size();
    detail::append_floats_le(blob, t.data);
    const std::size_t len = blob.size() - offset;
    header[name] = {{"dtype", "f32"},
                    {"shape", t.shape},
                    {"offset", offset},
                    {"byte_length", len},
                    {"crc32", crc32_of(blob.data() + offset, len)}};
  }
  const std::string header_text = header.dump();
  std::string out(kArchiveMagic, sizeof kArchiveMagic);
  detail::append_le32(out, kArchiveVersion);
  detail::append_le32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  out += blob;
  detail::append_le32(out, crc32_of(blob.data(), blob.size()));
  return out;
}

inline TensorArchive decode_archive(std::string_view bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kArchiveMagic, sizeof kArchiveMagic) != 0) {
    throw ArchiveError("", origin + ": bad magic (not a tensor archive)");
  }
  const std::uint32_t version = detail::read_le32(bytes.data() + 8);
  if (version != kArchiveVersion) {
    throw ArchiveError("", origin + ": unsupported archive version " + std::to_string(version));
  }
  const std::uint32_t header_len = detail::read_le32(bytes.data() + 12);
  if (bytes.size() < 16ull + header_len + 4) throw ArchiveError("", origin + ": truncated archive");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("", origin + ": header is not valid JSON: " + e.what());
  }
  if (!header.is_object()) throw ArchiveError("", origin + ": header must be a JSON object");
  const std::string_view blob = bytes.substr(16 + header_len, bytes.size() - 16 - header_len - 4);
  const std::uint32_t stored_crc = detail::read_le32(bytes.data() + bytes.size() - 4);
  const bool blob_ok = crc32_of(blob.data(), blob.size()) == stored_crc;

  TensorArchive archive;
  for (const auto& [name, entry] : header.items()) {
    if (name == "__metadata__") {
      archive.metadata = entry;
      continue;
    }
    NamedTensor t;
    std::uint64_t offset = 0, len = 0;
    try {
      if (entry.at("dtype").get<std::string>() != "f32") throw ArchiveError(name, "unsupported dtype");
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      offset = entry.at("offset").get<std::uint64_t>();
      len = entry.at("byte_length").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ArchiveError(name, std::string("malformed header entry: ") + e.what());
    }
    for (auto d : t.shape) {
      if (d < 0) throw ArchiveError(name, "negative dimension");
    }
    if (len != static_cast<std::uint64_t>(t.numel()) * 4) throw ArchiveError(name, "byte_length does not match shape");
    if (offset > blob.size() || len > blob.size() - offset) throw ArchiveError(name, "extends past end of blob");
    if (entry.contains("crc32") && crc32_of(blob.data() + offset, len) != entry["crc32"].get<std::uint32_t>()) {
      throw ArchiveError(name, "checksum mismatch");
    }
    t.data.resize(static_cast<std::size_t>(t.numel()));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const std::uint32_t u = detail::read_le32(blob.data() + offset + 4 * i);
      std::memcpy(&t.data[i], &u, sizeof u);
    }
    archive.tensors.emplace(name, std::move(t));
  }
  if (!blob_ok) throw ArchiveError("", origin + ": blob checksum mismatch");
  return archive;
}

inline void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  write_file_atomic(path, encode_archive(archive));
}

inline TensorArchive load_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path), path.string());
}

// Checks an archive against a layout: every tensor present with the exact
// shape, no extras, all values finite.
inline void validate_against_layout(const TensorArchive& archive, const std::vector<TensorSpec>& layout) {
  for (const auto& spec : layout) {
    auto it = archive.tensors.find(spec.name);
    if (it == archive.tensors.end()) throw ArchiveError(spec.name, "missing tensor");
    if (it->second.shape != spec.shape) {
      std::string got, want;
      for (auto d : it->second.shape) got += std::to_string(d) + ",";
      for (auto d : spec.shape) want += std::to_string(d) + ",";
      throw ArchiveError(spec.name, "shape mismatch: got [" + got + "] expected [" + want + "]");
    }
    for (float v : it->second.data) {
      if (!std::isfinite(v)) throw ArchiveError(spec.name, "non-finite value");
    }
  }
  if (archive.tensors.size() != layout.size()) {
    for (const auto& [name, t] : archive.tensors) {
      const bool known = std::any_of(layout.begin(), layout.end(), [&](const TensorSpec& s) { return s.name == name; });
      if (!known) throw ArchiveError(name, "unexpected tensor not in layout");
    }
  }
}

}  // namespace svdd
