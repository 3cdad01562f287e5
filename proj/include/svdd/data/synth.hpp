// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic desk-scale surrogate for the partition scheme.
//
// Every clip is a short sung phrase: a few notes of a harmonic source shaped
// by two singer-specific formants, with vibrato and a little breath noise.
// Bonafide phrases glide between notes and fade notes in and out. Deepfake
// phrases carry two cues whose strength is set by `separability`: note
// transitions become abrupt (pitch steps, hard onsets, short gaps) and a
// frame-modulated buzz appears in the 5-7.5 kHz band.
//
// Partitions follow the real scheme's singer structure: Train, Val and T01
// share singers, T02 and T04 singers are unseen, T03 is T02 through four
// codecs. T04 additionally moves to another "language" (formants and pitch
// range), adds background noise and scales the cues by 1 - t04_shift.
// The mixture variant adds a chord-and-percussion accompaniment.

#pragma once

#include "svdd/data/codec.hpp"
#include "svdd/data/manifest.hpp"

#include <numbers>

namespace svdd {

struct SurrogateConfig {
  std::uint64_t seed = 0;
  Variant variant = Variant::Vocals;
  double duration_s = 2.0;
  int sample_rate = 16000;
  int train_per_class = 60;
  int val_per_class = 20;
  int t01_per_class = 20;
  int t02_per_class = 20;
  int t04_per_class = 20;
  int seen_singers = 8;
  int unseen_singers = 4;  // for each of T02 and T04
  double separability = 1.0;
  double t04_shift = 0.6;
  double accompaniment_db = -6.0;  // accompaniment level relative to vocals (mixture only)
  std::vector<std::string> t03_codecs = {"g711_mulaw", "g711_alaw", "ima_adpcm", "narrowband_pcm"};

  void require_valid() const {
    if (!(duration_s >= 0.5 && duration_s <= 30.0)) throw ValidationError("surrogate: duration_s must be in [0.5, 30]");
    if (sample_rate < 16000) throw ValidationError("surrogate: sample_rate must be at least 16000");
    for (int n : {train_per_class, val_per_class, t01_per_class, t02_per_class, t04_per_class}) {
      if (n < 1) throw ValidationError("surrogate: every partition needs at least one clip per class");
    }
    if (seen_singers < 1 || unseen_singers < 1) throw ValidationError("surrogate: singer counts must be positive");
    if (!(separability >= 0.0 && separability <= 1.0)) throw ValidationError("surrogate: separability must be in [0, 1]");
    if (!(t04_shift >= 0.0 && t04_shift <= 1.0)) throw ValidationError("surrogate: t04_shift must be in [0, 1]");
    if (t03_codecs.size() != static_cast<std::size_t>(kT03CodecCount)) {
      throw ValidationError("surrogate: T03 needs exactly " + std::to_string(kT03CodecCount) + " codecs");
    }
  }
};

inline nlohmann::json to_json(const SurrogateConfig& c) {
  return {{"seed", c.seed},
          {"variant", std::string(variant_str(c.variant))},
          {"duration_s", c.duration_s},
          {"sample_rate", c.sample_rate},
          {"train_per_class", c.train_per_class},
          {"val_per_class", c.val_per_class},
          {"t01_per_class", c.t01_per_class},
          {"t02_per_class", c.t02_per_class},
          {"t04_per_class", c.t04_per_class},
          {"seen_singers", c.seen_singers},
          {"unseen_singers", c.unseen_singers},
          {"separability", c.separability},
          {"t04_shift", c.t04_shift},
          {"accompaniment_db", c.accompaniment_db},
          {"t03_codecs", c.t03_codecs}};
}

inline SurrogateConfig surrogate_config_from_json(const nlohmann::json& j) {
  SurrogateConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.duration_s = j.value("duration_s", c.duration_s);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.val_per_class = j.value("val_per_class", c.val_per_class);
    c.t01_per_class = j.value("t01_per_class", c.t01_per_class);
    c.t02_per_class = j.value("t02_per_class", c.t02_per_class);
    c.t04_per_class = j.value("t04_per_class", c.t04_per_class);
    c.seen_singers = j.value("seen_singers", c.seen_singers);
    c.unseen_singers = j.value("unseen_singers", c.unseen_singers);
    c.separability = j.value("separability", c.separability);
    c.t04_shift = j.value("t04_shift", c.t04_shift);
    c.accompaniment_db = j.value("accompaniment_db", c.accompaniment_db);
    c.t03_codecs = j.value("t03_codecs", c.t03_codecs);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("surrogate config: ") + e.what());
  }
  c.require_valid();
  return c;
}

namespace synth {

struct Singer {
  double f0 = 220.0;  // centre of the pitch range
  double formant1 = 600.0, formant2 = 1800.0;
  double vibrato_hz = 5.5, vibrato_depth = 0.015;
};

// Everything that varies between bonafide and deepfake phrases.
struct Style {
  double glide_s;     // pitch transition length
  double fade_s;      // note attack/release
  double gap_s;       // silence between notes
  double buzz_level;  // 5-7.5 kHz artefact RMS relative to the phrase RMS
  double formant_width;
};

inline Style style_for(Label label, double cue) {
  const Style bona{0.09, 0.12, 0.0, 0.0, 1.0};
  if (label == Label::Bonafide) return bona;
  const Style fake{0.002, 0.004, 0.03, 0.25, 1.8};
  auto mix = [&](double a, double b) { return a + cue * (b - a); };
  return {mix(bona.glide_s, fake.glide_s), mix(bona.fade_s, fake.fade_s), mix(bona.gap_s, fake.gap_s),
          mix(bona.buzz_level, fake.buzz_level), mix(bona.formant_width, fake.formant_width)};
}

inline std::uint64_t clip_seed(std::uint64_t seed, std::string_view key) {
  return fnv1a64(key, 14695981039346656037ull ^ (seed * 0x9E3779B97F4A7C15ull));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform_draw(rng); }

inline Singer make_singer(std::uint64_t seed, const std::string& id, bool shifted_domain) {
  std::mt19937_64 rng(clip_seed(seed, "singer/" + id));
  Singer s;
  s.f0 = uniform(rng, 160.0, 330.0) * (shifted_domain ? 1.4 : 1.0);
  s.formant1 = uniform(rng, 450.0, 800.0) * (shifted_domain ? 1.25 : 1.0);
  s.formant2 = uniform(rng, 1400.0, 2300.0) * (shifted_domain ? 0.8 : 1.0);
  s.vibrato_hz = uniform(rng, 4.8, 6.5);
  s.vibrato_depth = uniform(rng, 0.008, 0.02);
  return s;
}

inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return 0.5 - 0.5 * std::cos(std::numbers::pi * x);
}

inline double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(1, x.size())));
}

// One phrase of `n` samples.
inline std::vector<double> sing(const Singer& singer, const Style& style, int n, int sr, std::mt19937_64& rng) {
  const int n_notes = 3 + static_cast<int>(uniform_draw(rng) * 3.0);
  std::vector<double> bounds(static_cast<std::size_t>(n_notes) + 1);
  bounds[0] = 0.0;
  for (int k = 1; k <= n_notes; ++k) bounds[static_cast<std::size_t>(k)] = bounds[static_cast<std::size_t>(k) - 1] + uniform(rng, 0.7, 1.3);
  for (auto& b : bounds) b *= static_cast<double>(n) / sr / bounds.back();
  std::vector<double> pitch(static_cast<std::size_t>(n_notes));
  for (auto& p : pitch) p = singer.f0 * std::pow(2.0, uniform(rng, -5.0, 7.0) / 12.0);
  const double vib_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  double phase = 0.0;
  constexpr int kBlock = 80;
  std::vector<double> harm_amp;
  int note = 0;
  for (int start = 0; start < n; start += kBlock) {
    const int stop = std::min(n, start + kBlock);
    const double tc = (start + 0.5 * (stop - start)) / sr;
    while (note + 1 < n_notes && tc >= bounds[static_cast<std::size_t>(note) + 1]) ++note;
    for (int i = start; i < stop; ++i) {
      const double t = static_cast<double>(i) / sr;
      // Pitch: glide from the previous note over glide_s after the boundary.
      double f = pitch[static_cast<std::size_t>(note)];
      if (note > 0) {
        const double since = t - bounds[static_cast<std::size_t>(note)];
        const double w = style.glide_s > 0 ? smoothstep(since / style.glide_s) : 1.0;
        f = pitch[static_cast<std::size_t>(note) - 1] * std::pow(f / pitch[static_cast<std::size_t>(note) - 1], w);
      }
      f *= 1.0 + singer.vibrato_depth * std::sin(2.0 * std::numbers::pi * singer.vibrato_hz * t + vib_phase);
      // Amplitude: per-note fade in/out, optional silent gap before each note.
      const double t0 = bounds[static_cast<std::size_t>(note)], t1 = bounds[static_cast<std::size_t>(note) + 1];
      const double lead = t - t0 - (note > 0 ? style.gap_s : 0.0), tail = t1 - t;
      double env = lead < 0 ? 0.0 : smoothstep(lead / style.fade_s) * smoothstep(tail / style.fade_s);
      if (note > 0 && style.gap_s == 0.0) env = std::max(env, 0.35 * smoothstep(tail / style.fade_s));
      phase += 2.0 * std::numbers::pi * f / sr;
      if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
      if (i == start) {
        const int n_harm = std::max(1, static_cast<int>(7500.0 / f));
        harm_amp.assign(static_cast<std::size_t>(n_harm), 0.0);
        for (int h = 1; h <= n_harm; ++h) {
          const double fh = f * h;
          const double b1 = 90.0 * style.formant_width, b2 = 140.0 * style.formant_width;
          const double shape = 0.15 + std::exp(-0.5 * std::pow((fh - singer.formant1) / b1, 2)) +
                               0.6 * std::exp(-0.5 * std::pow((fh - singer.formant2) / b2, 2));
          harm_amp[static_cast<std::size_t>(h) - 1] = shape / std::pow(h, 1.5);
        }
      }
      // sin(h x) by the Chebyshev recurrence.
      const double s1 = std::sin(phase), c2 = 2.0 * std::cos(phase);
      double prev = 0.0, cur = s1, acc = 0.0;
      for (double a : harm_amp) {
        acc += a * cur;
        const double next = c2 * cur - prev;
        prev = cur;
        cur = next;
      }
      out[static_cast<std::size_t>(i)] = env * (acc + 0.01 * normal_draw(rng));
    }
  }
  if (style.buzz_level > 0.0) {
    // A few partials between 5 and 7.5 kHz, gated at a 100 Hz frame rate,
    // scaled to buzz_level times the phrase RMS.
    const int partials = 6;
    std::vector<double> freq(partials), ph(partials), buzz(static_cast<std::size_t>(n));
    for (int k = 0; k < partials; ++k) {
      freq[static_cast<std::size_t>(k)] = uniform(rng, 5000.0, 7500.0);
      ph[static_cast<std::size_t>(k)] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    }
    for (int i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      const double gate = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * 100.0 * t);
      double b = 0.0;
      for (int k = 0; k < partials; ++k) b += std::sin(2.0 * std::numbers::pi * freq[static_cast<std::size_t>(k)] * t + ph[static_cast<std::size_t>(k)]);
      buzz[static_cast<std::size_t>(i)] = gate * b;
    }
    const double gain = style.buzz_level * rms(out) / std::max(rms(buzz), 1e-12);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] += gain * buzz[static_cast<std::size_t>(i)];
  }
  return out;
}

// Sustained triad an octave below the vocal range plus noise hits on the beat.
inline std::vector<double> accompaniment(int n, int sr, std::mt19937_64& rng) {
  const double root = uniform(rng, 98.0, 147.0);
  const double ratios[3] = {1.0, 1.26, 1.5};
  const double beat = uniform(rng, 0.4, 0.6);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double s = 0.0;
    for (double r : ratios) s += std::sin(2.0 * std::numbers::pi * root * r * t) + 0.3 * std::sin(4.0 * std::numbers::pi * root * r * t);
    const double since = std::fmod(t, beat);
    s += 2.0 * std::exp(-since / 0.03) * normal_draw(rng);
    out[static_cast<std::size_t>(i)] = s / 4.0;
  }
  return out;
}

}  // namespace synth

// Renders one surrogate clip. Deterministic in (cfg.seed, clip_id).
inline Waveform synthesize_clip(const SurrogateConfig& cfg, const ClipRecord& r, const synth::Singer& singer) {
  std::mt19937_64 rng(synth::clip_seed(cfg.seed, r.clip_id));
  const int n = static_cast<int>(std::lround(cfg.duration_s * cfg.sample_rate));
  const bool shifted = r.partition == Partition::T04;
  const double cue = cfg.separability * (shifted ? 1.0 - cfg.t04_shift : 1.0);
  std::vector<double> x = synth::sing(singer, synth::style_for(r.label, cue), n, cfg.sample_rate, rng);
  const double vocal_rms = std::max(1e-9, synth::rms(x));
  if (shifted) {
    for (auto& v : x) v += 0.1 * vocal_rms * normal_draw(rng);
  }
  if (r.variant == Variant::Mixture) {
    auto acc = synth::accompaniment(n, cfg.sample_rate, rng);
    const double gain = vocal_rms * std::pow(10.0, cfg.accompaniment_db / 20.0) / std::max(1e-9, synth::rms(acc));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += gain * acc[i];
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double scale = synth::uniform(rng, 0.3, 0.8) / std::max(peak, 1e-9);
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w.samples[i] = static_cast<float>(x[i] * scale);
  return w;
}

// Clip records for every partition except T03, in a fixed order.
inline std::vector<ClipRecord> surrogate_records(const SurrogateConfig& cfg) {
  cfg.require_valid();
  std::vector<ClipRecord> out;
  const std::string var(variant_str(cfg.variant));
  auto add = [&](Partition p, int per_class, const std::string& singer_prefix, int singer_offset, int n_singers,
                 const std::string& language) {
    const std::string part = to_lower(std::string(partition_str(p)));
    int k = 0;
    for (int i = 0; i < per_class; ++i) {
      for (Label l : {Label::Bonafide, Label::Deepfake}) {
        ClipRecord r;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d", k);
        r.clip_id = part + "_" + buf;
        r.path = var + "/" + std::string(partition_str(p)) + "/" + r.clip_id + ".wav";
        r.label = l;
        r.singer_id = singer_prefix + std::to_string(singer_offset + k % n_singers);
        r.language = language;
        r.partition = p;
        r.variant = cfg.variant;
        out.push_back(std::move(r));
        ++k;
      }
    }
  };
  add(Partition::Train, cfg.train_per_class, "s", 0, cfg.seen_singers, "lang_a");
  add(Partition::Val, cfg.val_per_class, "s", 0, cfg.seen_singers, "lang_a");
  add(Partition::T01, cfg.t01_per_class, "s", 0, cfg.seen_singers, "lang_a");
  add(Partition::T02, cfg.t02_per_class, "s", cfg.seen_singers, cfg.unseen_singers, "lang_a");
  add(Partition::T04, cfg.t04_per_class, "s", cfg.seen_singers + cfg.unseen_singers, cfg.unseen_singers, "lang_c");
  return out;
}

// Writes audio and `manifest.csv` under out_dir. T03 is rendered from T02 with
// the configured codecs, which must be available.
inline Manifest generate_surrogate(const SurrogateConfig& cfg, const std::filesystem::path& out_dir,
                                   const CodecRegistry& codecs = builtin_codec_registry(), std::size_t workers = 1) {
  cfg.require_valid();
  Manifest m;
  m.base_dir = out_dir;
  m.records = surrogate_records(cfg);
  parallel_for(m.records.size(), workers, [&](std::size_t i) {
    const ClipRecord& r = m.records[i];
    const synth::Singer singer = synth::make_singer(cfg.seed, r.singer_id, r.partition == Partition::T04);
    Waveform w = synthesize_clip(cfg, r, singer);
    if (w.sample_rate != 16000) w = resample(w, 16000);
    write_wav(m.audio_path(r), w);
  });
  for (const auto& c : cfg.t03_codecs) {
    if (!codecs.available(c)) throw CodecUnavailable("surrogate: T03 codec '" + c + "' is unavailable");
  }
  const T03RenderResult t03 = render_t03(m, codecs, cfg.t03_codecs, out_dir, workers);
  std::vector<ClipRecord> all;
  for (Partition p : kAllPartitions) {
    if (p == Partition::T03) {
      all.insert(all.end(), t03.records.begin(), t03.records.end());
    } else {
      for (auto& r : m.records) {
        if (r.partition == p) all.push_back(r);
      }
    }
  }
  m.records = std::move(all);
  write_manifest(out_dir / "manifest.csv", m.records);
  write_file_atomic(out_dir / "surrogate.json", to_json(cfg).dump(2) + "\n");
  return m;
}

}  // namespace svdd
