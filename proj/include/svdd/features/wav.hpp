// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/features/resample.hpp"
#include "svdd/features/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace svdd {

enum class WavEncoding { Pcm16, Float32 };

// Decoded RIFF/WAVE contents before any channel mixing.
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  WavEncoding encoding = WavEncoding::Pcm16;
  std::vector<float> interleaved;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline WavData parse_wav(std::string_view bytes, const std::string& origin = "<memory>") {
  using detail::le16;
  using detail::le32;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw FormatError(origin + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t len = le32(p + pos + 4);
    const unsigned char* body = p + pos + 8;
    const std::size_t avail = n - (pos + 8);
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) throw FormatError(origin + ": truncated fmt chunk");
      format = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      bits = le16(body + 14);
      if (format == 0xFFFE) {
        if (len < 40 || avail < 40) throw FormatError(origin + ": truncated extensible fmt chunk");
        format = le16(body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      data = body;
      data_len = std::min<std::size_t>(len, avail);
    }
    pos += 8 + static_cast<std::size_t>(len) + (len & 1u);
  }
  if (!have_fmt) throw FormatError(origin + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(origin + ": missing data chunk");
  if (channels == 0 || rate == 0) throw FormatError(origin + ": invalid channel count or sample rate");

  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  if (format == 1 && bits == 16) {
    out.encoding = WavEncoding::Pcm16;
    const std::size_t count = data_len / 2;
    out.interleaved.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
      out.interleaved[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    out.encoding = WavEncoding::Float32;
    const std::size_t count = data_len / 4;
    out.interleaved.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t u = le32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, sizeof f);
      out.interleaved[i] = f;
    }
  } else {
    throw FormatError(origin + ": unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }
  out.interleaved.resize(out.interleaved.size() - out.interleaved.size() % channels);
  if (out.interleaved.empty()) throw FormatError(origin + ": zero-length audio");
  return out;
}

inline Waveform mix_to_mono(const WavData& wav) {
  Waveform w;
  w.sample_rate = wav.sample_rate;
  const std::size_t frames = wav.interleaved.size() / static_cast<std::size_t>(wav.channels);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < wav.channels; ++c) acc += wav.interleaved[i * static_cast<std::size_t>(wav.channels) + static_cast<std::size_t>(c)];
    w.samples[i] = static_cast<float>(acc / wav.channels);
  }
  return w;
}

// Reads a PCM WAV file, averages channels to mono and resamples to
// target_rate with the windowed-sinc resampler.
inline Waveform load_audio(const std::filesystem::path& path, int target_rate) {
  if (target_rate <= 0) throw ValidationError("target rate must be positive");
  const WavData wav = parse_wav(read_file(path), path.string());
  Waveform mono = mix_to_mono(wav);
  if (mono.sample_rate == target_rate) return mono;
  return resample(mono, target_rate);
}

inline std::string encode_wav(const Waveform& w, WavEncoding enc = WavEncoding::Pcm16) {
  using detail::put_le16;
  using detail::put_le32;
  w.require_valid();
  const std::uint16_t bits = enc == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_le32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_le32(out, 16);
  put_le16(out, enc == WavEncoding::Pcm16 ? 1 : 3);
  put_le16(out, 1);
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  put_le16(out, bits / 8);
  put_le16(out, bits);
  out += "data";
  put_le32(out, data_len);
  for (float s : w.samples) {
    if (enc == WavEncoding::Pcm16) {
      const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
      const long q = std::lround(c * 32767.0);
      put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      std::uint32_t u;
      std::memcpy(&u, &s, sizeof u);
      put_le32(out, u);
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding enc = WavEncoding::Pcm16) {
  write_file_atomic(path, encode_wav(w, enc));
}

}  // namespace svdd
