// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Codec degradation for the T03 condition.
//
// A codec is either one of the built-in telephony-band codecs below or an
// external command template. Built-ins run at 8 kHz: the input is resampled
// down, quantised to 16-bit, encoded and decoded sample by sample, and
// resampled back to the input rate.
//
//   identity        no-op, for tests
//   g711_mulaw      ITU-T G.711 mu-law, 64 kbit/s
//   g711_alaw       ITU-T G.711 A-law, 64 kbit/s
//   ima_adpcm       IMA/DVI 4-bit ADPCM, 32 kbit/s
//   narrowband_pcm  8 kHz 16-bit PCM (band limiting only), 128 kbit/s
//
// External templates are run through /bin/sh with these placeholders
// substituted (paths are single-quoted):
//   {input}    16 kHz 16-bit mono WAV to encode
//   {output}   WAV the command must leave behind after decoding
//   {workdir}  private scratch directory for intermediate files
//   {bitrate}  the configured bitrate string

#pragma once

#include "svdd/data/manifest.hpp"
#include "svdd/features/resample.hpp"
#include "svdd/features/wav.hpp"

#include "json.hpp"

#include <cstdlib>
#include <functional>
#include <map>

namespace svdd {

class CodecUnavailable : public Error {
 public:
  using Error::Error;
};

namespace codec {

// Sun-style G.711 on 16-bit linear samples.
inline std::uint8_t mulaw_encode(std::int16_t sample) {
  static constexpr int kSegEnd[8] = {0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF};
  int pcm = sample >> 2;
  int mask = 0xFF;
  if (pcm < 0) {
    pcm = -pcm;
    mask = 0x7F;
  }
  pcm = std::min(pcm, 8159) + 0x21;
  int seg = 0;
  while (seg < 8 && pcm > kSegEnd[seg]) ++seg;
  if (seg >= 8) return static_cast<std::uint8_t>(0x7F ^ mask);
  return static_cast<std::uint8_t>(((seg << 4) | ((pcm >> (seg + 1)) & 0xF)) ^ mask);
}

inline std::int16_t mulaw_decode(std::uint8_t code) {
  const int u = ~code & 0xFF;
  int t = ((u & 0x0F) << 3) + 0x84;
  t <<= (u & 0x70) >> 4;
  return static_cast<std::int16_t>((u & 0x80) ? 0x84 - t : t - 0x84);
}

inline std::uint8_t alaw_encode(std::int16_t sample) {
  static constexpr int kSegEnd[8] = {0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF};
  int pcm = sample >> 3;
  int mask = 0xD5;
  if (pcm < 0) {
    pcm = -pcm - 1;
    mask = 0x55;
  }
  int seg = 0;
  while (seg < 8 && pcm > kSegEnd[seg]) ++seg;
  if (seg >= 8) return static_cast<std::uint8_t>(0x7F ^ mask);
  int a = seg << 4;
  a |= seg < 2 ? (pcm >> 1) & 0xF : (pcm >> seg) & 0xF;
  return static_cast<std::uint8_t>(a ^ mask);
}

inline std::int16_t alaw_decode(std::uint8_t code) {
  const int a = code ^ 0x55;
  int t = (a & 0x0F) << 4;
  const int seg = (a & 0x70) >> 4;
  if (seg == 0) {
    t += 8;
  } else {
    t += 0x108;
    t <<= seg - 1;
  }
  return static_cast<std::int16_t>((a & 0x80) ? t : -t);
}

inline constexpr int kImaIndexAdjust[16] = {-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8};
inline constexpr int kImaStep[89] = {
    7,     8,     9,     10,    11,    12,    13,    14,    16,    17,    19,    21,    23,    25,    28,
    31,    34,    37,    41,    45,    50,    55,    60,    66,    73,    80,    88,    97,    107,   118,
    130,   143,   157,   173,   190,   209,   230,   253,   279,   307,   337,   371,   408,   449,   494,
    544,   598,   658,   724,   796,   876,   963,   1060,  1166,  1282,  1411,  1552,  1707,  1878,  2066,
    2272,  2499,  2749,  3024,  3327,  3660,  4026,  4428,  4871,  5358,  5894,  6484,  7132,  7845,  8630,
    9493,  10442, 11487, 12635, 13899, 15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767};

struct ImaState {
  int predictor = 0;
  int index = 0;

  // Applies one 4-bit code and returns the reconstructed sample.
  std::int16_t decode(std::uint8_t nibble) {
    const int step = kImaStep[index];
    int diff = step >> 3;
    if (nibble & 4) diff += step;
    if (nibble & 2) diff += step >> 1;
    if (nibble & 1) diff += step >> 2;
    predictor += (nibble & 8) ? -diff : diff;
    predictor = std::clamp(predictor, -32768, 32767);
    index = std::clamp(index + kImaIndexAdjust[nibble & 0xF], 0, 88);
    return static_cast<std::int16_t>(predictor);
  }

  std::uint8_t encode(std::int16_t sample) {
    int diff = sample - predictor;
    std::uint8_t nibble = 0;
    if (diff < 0) {
      nibble = 8;
      diff = -diff;
    }
    int step = kImaStep[index];
    for (std::uint8_t bit = 4; bit; bit >>= 1) {
      if (diff >= step) {
        nibble |= bit;
        diff -= step;
      }
      step >>= 1;
    }
    decode(nibble);
    return nibble;
  }
};

inline std::vector<std::uint8_t> ima_encode(const std::vector<std::int16_t>& pcm) {
  ImaState st;
  std::vector<std::uint8_t> out(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) out[i] = st.encode(pcm[i]);
  return out;
}

inline std::vector<std::int16_t> ima_decode(const std::vector<std::uint8_t>& nibbles) {
  ImaState st;
  std::vector<std::int16_t> out(nibbles.size());
  for (std::size_t i = 0; i < nibbles.size(); ++i) out[i] = st.decode(nibbles[i]);
  return out;
}

inline std::vector<std::int16_t> to_pcm16(const std::vector<float>& x) {
  std::vector<std::int16_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<std::int16_t>(std::clamp<long>(std::lround(static_cast<double>(x[i]) * 32768.0), -32768, 32767));
  }
  return out;
}

inline std::vector<float> from_pcm16(const std::vector<std::int16_t>& x) {
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] / 32768.0);
  return out;
}

inline constexpr int kNarrowbandRate = 8000;

// Runs a per-sample 16-bit codec at 8 kHz and returns audio at the input rate.
inline Waveform narrowband_roundtrip(const Waveform& w, const std::function<std::int16_t(std::int16_t)>& codec) {
  Waveform nb = resample(w, kNarrowbandRate);
  auto pcm = to_pcm16(nb.samples);
  for (auto& s : pcm) s = codec(s);
  nb.samples = from_pcm16(pcm);
  return resample(nb, w.sample_rate);
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline bool program_on_path(const std::string& prog) {
  namespace fs = std::filesystem;
  if (prog.find('/') != std::string::npos) return fs::exists(prog);
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const std::string dir(rest.substr(0, colon));
    rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
    if (dir.empty()) continue;
    std::error_code ec;
    const fs::path cand = fs::path(dir) / prog;
    if (fs::exists(cand, ec) && !fs::is_directory(cand, ec)) return true;
  }
  return false;
}

// First word of each command in a simple `a && b; c | d` pipeline.
inline std::vector<std::string> template_programs(const std::string& tmpl) {
  std::vector<std::string> progs;
  bool expect = true;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c == '&' || c == '|' || c == ';') {
      expect = true;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < tmpl.size() && !std::isspace(static_cast<unsigned char>(tmpl[j])) && tmpl[j] != ';' &&
           tmpl[j] != '|' && tmpl[j] != '&') {
      ++j;
    }
    if (expect) progs.push_back(tmpl.substr(i, j - i));
    expect = false;
    i = j;
  }
  return progs;
}

inline std::string substitute(std::string s, const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string pat = "{" + key + "}";
    for (std::size_t pos = s.find(pat); pos != std::string::npos; pos = s.find(pat, pos + value.size())) {
      s.replace(pos, pat.size(), value);
    }
  }
  return s;
}

}  // namespace codec

struct CodecSpec {
  std::string tag;
  std::string builtin;  // non-empty for built-in codecs
  std::string command;  // external template
  std::string bitrate;

  bool is_builtin() const { return !builtin.empty(); }
};

inline const std::vector<std::string>& builtin_codec_names() {
  static const std::vector<std::string> names = {"identity", "g711_mulaw", "g711_alaw", "ima_adpcm", "narrowband_pcm"};
  return names;
}

inline std::string builtin_bitrate(const std::string& name) {
  if (name == "g711_mulaw" || name == "g711_alaw") return "64k";
  if (name == "ima_adpcm") return "32k";
  if (name == "narrowband_pcm") return "128k";
  return "";
}

class CodecRegistry {
 public:
  void add(CodecSpec spec) {
    if (spec.tag.empty()) throw ValidationError("codec tag must not be empty");
    if (spec.is_builtin()) {
      const auto& names = builtin_codec_names();
      if (std::find(names.begin(), names.end(), spec.builtin) == names.end()) {
        throw ValidationError("codec '" + spec.tag + "': unknown built-in '" + spec.builtin + "'");
      }
      const std::string fixed = builtin_bitrate(spec.builtin);
      if (spec.bitrate.empty()) {
        spec.bitrate = fixed;
      } else if (spec.bitrate != fixed) {
        throw ValidationError("codec '" + spec.tag + "': built-in " + spec.builtin + " runs at " +
                              (fixed.empty() ? "no fixed bitrate" : fixed) + ", not " + spec.bitrate);
      }
    } else if (spec.command.empty()) {
      throw ValidationError("codec '" + spec.tag + "' needs either \"builtin\" or \"command\"");
    }
    specs_[spec.tag] = std::move(spec);
  }

  bool contains(const std::string& tag) const { return specs_.count(tag) != 0; }

  const CodecSpec& at(const std::string& tag) const {
    const auto it = specs_.find(tag);
    if (it == specs_.end()) throw ValidationError("codec '" + tag + "' is not configured");
    return it->second;
  }

  std::vector<std::string> tags() const {
    std::vector<std::string> out;
    for (const auto& [tag, spec] : specs_) out.push_back(tag);
    return out;
  }

  // Built-ins are always available; an external codec is available when every
  // program its template invokes is found.
  bool available(const std::string& tag) const {
    const CodecSpec& s = at(tag);
    if (s.is_builtin()) return true;
    for (const auto& prog : codec::template_programs(s.command)) {
      if (!codec::program_on_path(prog)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, CodecSpec> specs_;
};

// {"tag": {"builtin": "g711_mulaw"}, "tag2": {"command": "...", "bitrate": "12.2k"}, ...}
inline CodecRegistry codec_registry_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("codec config must be a JSON object mapping tag to codec");
  CodecRegistry reg;
  for (const auto& [tag, v] : j.items()) {
    if (!v.is_object()) throw FormatError("codec '" + tag + "' must be an object");
    CodecSpec s;
    s.tag = tag;
    try {
      s.builtin = v.value("builtin", std::string());
      s.command = v.value("command", std::string());
      s.bitrate = v.value("bitrate", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("codec '" + tag + "': " + e.what());
    }
    reg.add(std::move(s));
  }
  return reg;
}

inline CodecRegistry load_codec_registry(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return codec_registry_from_json(j);
}

inline CodecRegistry builtin_codec_registry() {
  CodecRegistry reg;
  for (const auto& name : builtin_codec_names()) reg.add({name, name, "", ""});
  return reg;
}

namespace codec {

inline Waveform run_external(const Waveform& w, const CodecSpec& spec) {
  namespace fs = std::filesystem;
  static std::atomic<std::uint64_t> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("svdd-codec-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "-" +
                        std::to_string(counter.fetch_add(1)));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{dir};

  const fs::path in = dir / "input.wav", out = dir / "output.wav";
  Waveform src = w.sample_rate == 16000 ? w : resample(w, 16000);
  write_wav(in, src);
  const std::string cmd = substitute(spec.command, {{"input", shell_quote(in.string())},
                                                    {"output", shell_quote(out.string())},
                                                    {"workdir", shell_quote(dir.string())},
                                                    {"bitrate", spec.bitrate}});
  const int rc = std::system(("{ " + cmd + " ; } >/dev/null 2>&1").c_str());
  if (rc != 0) throw IoError("codec '" + spec.tag + "': command failed (status " + std::to_string(rc) + ")");
  if (!fs::exists(out)) throw IoError("codec '" + spec.tag + "': command did not write {output}");
  Waveform decoded = load_audio(out, w.sample_rate);
  // Codec framing can append padding; leading priming delay is left in place.
  if (decoded.samples.size() > w.samples.size()) decoded.samples.resize(w.samples.size());
  return decoded;
}

}  // namespace codec

// Encode-decode round trip through the named codec. The result has the input's
// sample rate. Throws CodecUnavailable when an external codec's programs are
// not installed.
inline Waveform codec_augment(const Waveform& w, const std::string& tag, const CodecRegistry& reg) {
  w.require_valid("codec input");
  const CodecSpec& spec = reg.at(tag);
  if (!spec.is_builtin()) {
    if (!reg.available(tag)) {
      throw CodecUnavailable("codec '" + tag + "' is unavailable: program not found for `" + spec.command + "`");
    }
    return codec::run_external(w, spec);
  }
  const std::string& b = spec.builtin;
  if (b == "identity") return w;
  if (b == "g711_mulaw") return codec::narrowband_roundtrip(w, [](std::int16_t s) { return codec::mulaw_decode(codec::mulaw_encode(s)); });
  if (b == "g711_alaw") return codec::narrowband_roundtrip(w, [](std::int16_t s) { return codec::alaw_decode(codec::alaw_encode(s)); });
  if (b == "narrowband_pcm") return codec::narrowband_roundtrip(w, [](std::int16_t s) { return s; });
  if (b == "ima_adpcm") {
    Waveform nb = resample(w, codec::kNarrowbandRate);
    nb.samples = codec::from_pcm16(codec::ima_decode(codec::ima_encode(codec::to_pcm16(nb.samples))));
    return resample(nb, w.sample_rate);
  }
  throw ValidationError("codec '" + tag + "': unknown built-in '" + b + "'");
}

// ---- T03 ---------------------------------------------------------------------------

// One T03 record per (T02 clip, codec), in clip-major order. The new clip id is
// "<clip>@<codec>" and the audio path "T03/<codec>/<clip>.wav".
inline std::vector<ClipRecord> build_t03(const std::vector<ClipRecord>& t02, const std::vector<std::string>& codecs) {
  if (codecs.size() != static_cast<std::size_t>(kT03CodecCount)) {
    throw ValidationError("T03 needs exactly " + std::to_string(kT03CodecCount) + " codecs, got " +
                          std::to_string(codecs.size()));
  }
  for (std::size_t i = 0; i < codecs.size(); ++i) {
    if (codecs[i].empty()) throw ValidationError("T03 codec tag must not be empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (codecs[i] == codecs[j]) throw ValidationError("T03 codec '" + codecs[i] + "' listed twice");
    }
  }
  std::vector<ClipRecord> out;
  out.reserve(t02.size() * codecs.size());
  for (const auto& r : t02) {
    if (r.partition != Partition::T02) {
      throw ValidationError("clip '" + r.clip_id + "' is in " + std::string(partition_str(r.partition)) + ", not T02");
    }
    if (r.codec) throw ValidationError("clip '" + r.clip_id + "' is already codec-processed");
    for (const auto& c : codecs) {
      ClipRecord t = r;
      t.clip_id = r.clip_id + "@" + c;
      t.path = "T03/" + c + "/" + r.clip_id + ".wav";
      t.partition = Partition::T03;
      t.codec = c;
      t.audio_missing = false;
      out.push_back(std::move(t));
    }
  }
  return out;
}

struct T03RenderResult {
  std::vector<ClipRecord> records;    // clips written, paths relative to out_dir
  std::vector<std::string> warnings;  // one per skipped clip
};

// Builds T03 from the T02 clips of `m`, writing degraded audio under out_dir.
// Clips whose codec is unavailable are skipped with a warning; any other
// failure propagates.
inline T03RenderResult render_t03(const Manifest& m, const CodecRegistry& reg, const std::vector<std::string>& codecs,
                                  const std::filesystem::path& out_dir, std::size_t workers = 1) {
  const auto t02 = m.select(Partition::T02);
  const auto planned = build_t03(t02, codecs);
  for (const auto& c : codecs) reg.at(c);
  std::vector<char> ok(planned.size(), 0);
  std::vector<std::string> warn(planned.size());
  parallel_for(planned.size(), workers, [&](std::size_t i) {
    const ClipRecord& src = t02[i / codecs.size()];
    const ClipRecord& dst = planned[i];
    try {
      const Waveform w = load_audio(m.audio_path(src), 16000);
      write_wav(out_dir / dst.path, codec_augment(w, *dst.codec, reg));
      ok[i] = 1;
    } catch (const CodecUnavailable& e) {
      warn[i] = "skipping " + dst.clip_id + ": " + e.what();
    }
  });
  T03RenderResult res;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    if (ok[i]) {
      res.records.push_back(planned[i]);
    } else {
      res.warnings.push_back(warn[i]);
    }
  }
  return res;
}

}  // namespace svdd
