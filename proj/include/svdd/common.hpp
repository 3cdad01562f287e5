// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace svdd {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers (the CLI in particular) can map any of them to a nonzero exit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVectorF = Eigen::Matrix<float, 1, Eigen::Dynamic>;
using RowVectorD = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temp file and renames it into place, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << "." << counter.fetch_add(1);
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

// Shortest round-trip decimal text for a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fisher-Yates over [0, n) driven by a 64-bit Mersenne twister. Written out
// instead of std::shuffle so the permutation does not depend on the standard
// library's distribution implementation.
inline void deterministic_shuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

// Box-Muller normal draw from a raw 64-bit engine, for the same reason.
inline double normal_draw(std::mt19937_64& rng) {
  constexpr double kInv = 1.0 / 9007199254740992.0;  // 2^-53
  double u1 = static_cast<double>(rng() >> 11) * kInv;
  const double u2 = static_cast<double>(rng() >> 11) * kInv;
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline double uniform_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Runs fn(i) for i in [0, n) on at most `workers` threads. Results must be
// written to disjoint slots by fn; the first exception (lowest index) is
// rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Plain comma splitting; the toolkit's CSV files never quote fields. A
// trailing CR is dropped.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r') cells.back().pop_back();
  return cells;
}

// Class 0 is bonafide throughout: logits, scores and CSV labels.
enum class Label { Bonafide = 0, Deepfake = 1 };

inline std::string_view label_str(Label l) { return l == Label::Bonafide ? "bonafide" : "deepfake"; }

inline Label parse_label(std::string_view s) {
  const std::string l = to_lower(std::string(s));
  if (l == "bonafide" || l == "bona-fide" || l == "bona_fide") return Label::Bonafide;
  if (l == "deepfake" || l == "spoof" || l == "fake") return Label::Deepfake;
  throw FormatError("unknown label '" + std::string(s) + "'");
}

enum class Partition { Train, Val, T01, T02, T03, T04 };

inline constexpr Partition kAllPartitions[] = {Partition::Train, Partition::Val, Partition::T01,
                                               Partition::T02,   Partition::T03, Partition::T04};
inline constexpr Partition kTestPartitions[] = {Partition::T01, Partition::T02, Partition::T03, Partition::T04};

inline std::string_view partition_str(Partition p) {
  switch (p) {
    case Partition::Train: return "Train";
    case Partition::Val: return "Val";
    case Partition::T01: return "T01";
    case Partition::T02: return "T02";
    case Partition::T03: return "T03";
    case Partition::T04: return "T04";
  }
  return "?";
}

inline Partition parse_partition(std::string_view s) {
  const std::string l = to_lower(std::string(s));
  if (l == "validation") return Partition::Val;
  for (Partition p : kAllPartitions) {
    if (to_lower(std::string(partition_str(p))) == l) return p;
  }
  throw FormatError("unknown partition '" + std::string(s) + "'");
}

enum class Variant { Vocals, Mixture };

inline std::string_view variant_str(Variant v) { return v == Variant::Vocals ? "vocals" : "mixture"; }

inline Variant parse_variant(std::string_view s) {
  const std::string l = to_lower(std::string(s));
  if (l == "vocals" || l == "vocal") return Variant::Vocals;
  if (l == "mixture" || l == "mixtures") return Variant::Mixture;
  throw FormatError("unknown variant '" + std::string(s) + "'");
}

}  // namespace svdd
