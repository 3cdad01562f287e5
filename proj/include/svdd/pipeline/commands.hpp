// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// The pipeline behind the command-line tool: feature extraction with an
// on-disk cache, head training, per-partition evaluation and report tables.

#pragma once

#include "svdd/data/manifest.hpp"
#include "svdd/encoder/model.hpp"
#include "svdd/eval/report.hpp"
#include "svdd/features.hpp"
#include "svdd/heads/train.hpp"
#include "svdd/pipeline/experiment.hpp"

#include <iostream>

namespace svdd {

// Progress sink; silent when no stream is set.
struct Log {
  std::ostream* out = nullptr;
  void operator()(const std::string& line) const {
    if (out) *out << line << '\n';
  }
};

// ---- features ----------------------------------------------------------------------

class FeaturePipeline {
 public:
  FeaturePipeline(FeatureSystem system, const FrontendConfig& frontend, const std::filesystem::path& weights = {})
      : system_(system), frontend_(frontend) {
    nlohmann::json key = {{"system", feature_system_name(system)}, {"format", 1}};
    if (is_encoder_system(system)) {
      if (system == FeatureSystem::WCustom) {
        model_ = std::make_shared<EncoderModel>(load_encoder(weights));
      } else {
        model_ = std::make_shared<EncoderModel>(load_weights(weights, encoder_config(encoder_size(system))));
      }
      if (model_->config.size != encoder_size(system)) {
        throw ValidationError(weights.string() + " holds a " + std::string(size_name_str(model_->config.size)) +
                              " encoder, not " + std::string(feature_system_name(system)));
      }
      key["encoder"] = to_json(model_->config);
      key["weights_fnv1a64"] = hex64(fnv1a64(read_file(weights)));
    } else {
      key["frontend"] = to_json(frontend);
    }
    hash_ = hex64(fnv1a64(key.dump()));
  }

  FeatureSystem system() const { return system_; }
  const std::string& config_hash() const { return hash_; }

  FeatureMatrix compute(const Waveform& w, const std::string& clip_id) const {
    FeatureMatrix f;
    switch (system_) {
      case FeatureSystem::MFCC: f = mfcc(w, {}, frontend_.cepstral_filters, frontend_.cepstral_coeffs); break;
      case FeatureSystem::LFCC: f = lfcc(w, {}, frontend_.cepstral_filters, frontend_.cepstral_coeffs); break;
      case FeatureSystem::CQCC:
        f = cqcc(w, frontend_.cqcc_bins_per_octave, frontend_.cqcc_fmin, frontend_.cqcc_fmax, frontend_.cqcc_coeffs);
        break;
      default: {
        FeatureMatrix mel = log_mel_spectrogram(w, {}, model_->config.n_mels);
        mel.source_clip = clip_id;
        f = encode(mel, *model_).as_features();
      }
    }
    f.source_clip = clip_id;
    f.require_valid();
    return f;
  }

 private:
  FeatureSystem system_;
  FrontendConfig frontend_;
  std::shared_ptr<EncoderModel> model_;
  std::string hash_;
};

// File name for a clip id: safe characters are kept, anything else becomes
// '_' and a hash of the original id is appended to keep names unique.
inline std::string cache_file_name(const std::string& clip_id) {
  std::string safe;
  bool changed = false;
  for (char c : clip_id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '@') {
      safe += c;
    } else {
      safe += '_';
      changed = true;
    }
  }
  if (changed || safe.empty() || safe[0] == '.') safe += "-" + hex64(fnv1a64(clip_id));
  return safe + ".feat";
}

class FeatureCache {
 public:
  FeatureCache(const FeaturePipeline& pipeline, const std::filesystem::path& root)
      : pipeline_(pipeline), dir_(root / std::string(feature_system_name(pipeline.system())) / pipeline.config_hash()) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path_for(const std::string& clip_id) const { return dir_ / cache_file_name(clip_id); }

  // Cached entries are current when they are at least as new as the audio.
  bool up_to_date(const Manifest& m, const ClipRecord& r) const {
    std::error_code ec;
    const auto cached = std::filesystem::last_write_time(path_for(r.clip_id), ec);
    if (ec) return false;
    const auto audio = std::filesystem::last_write_time(m.audio_path(r), ec);
    return !ec && cached >= audio;
  }

  FeatureMatrix compute_and_store(const Manifest& m, const ClipRecord& r) const {
    const Waveform w = load_audio(m.audio_path(r), kEncoderSampleRate);
    FeatureMatrix f = pipeline_.compute(w, r.clip_id);
    save_features(path_for(r.clip_id), f);
    return f;
  }

  FeatureMatrix get(const Manifest& m, const ClipRecord& r) const {
    if (up_to_date(m, r)) {
      FeatureMatrix f = load_features(path_for(r.clip_id));
      f.source_clip = r.clip_id;
      return f;
    }
    return compute_and_store(m, r);
  }

 private:
  const FeaturePipeline& pipeline_;
  std::filesystem::path dir_;
};

struct ExtractStats {
  std::size_t computed = 0;
  std::size_t skipped = 0;
};

inline std::vector<ClipRecord> records_for(const Manifest& m, Variant v, std::optional<Partition> p = std::nullopt) {
  std::vector<ClipRecord> out;
  for (const auto& r : m.records) {
    if (r.variant == v && (!p || r.partition == *p)) out.push_back(r);
  }
  return out;
}

inline void require_audio(const std::vector<ClipRecord>& records) {
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (r.audio_missing) missing.push_back(r.clip_id);
  }
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " clip(s) have no audio file, e.g.";
  for (std::size_t i = 0; i < std::min<std::size_t>(3, missing.size()); ++i) msg += " " + missing[i];
  throw ValidationError(msg);
}

inline ExtractStats extract_features(const FeatureCache& cache, const Manifest& m, const std::vector<ClipRecord>& records,
                                     std::size_t workers) {
  require_audio(records);
  std::vector<const ClipRecord*> todo;
  ExtractStats st;
  for (const auto& r : records) {
    if (cache.up_to_date(m, r)) {
      ++st.skipped;
    } else {
      todo.push_back(&r);
    }
  }
  parallel_for(todo.size(), workers, [&](std::size_t i) { cache.compute_and_store(m, *todo[i]); });
  st.computed = todo.size();
  return st;
}

inline LabeledSet load_labeled(const FeatureCache& cache, const Manifest& m, const std::vector<ClipRecord>& records) {
  LabeledSet s;
  for (const auto& r : records) {
    s.features.push_back(cache.get(m, r));
    s.labels.push_back(r.label);
  }
  return s;
}

// ---- commands -------------------------------------------------------------------------

inline std::filesystem::path head_path(const ExperimentConfig& c) { return c.out_dir / "head.svdt"; }

struct ExperimentContext {
  ExperimentConfig config;
  Manifest manifest;
  FeaturePipeline pipeline;
  FeatureCache cache;

  explicit ExperimentContext(const ExperimentConfig& c)
      : config((c.require_valid(), c)),
        manifest(load_manifest(c.manifest)),
        pipeline(c.feature, c.frontend, c.weights),
        cache(pipeline, c.feature_cache()) {}
};

inline ExtractStats cmd_extract(const ExperimentConfig& cfg, const Log& log = {}) {
  ExperimentContext ctx(cfg);
  const auto records = records_for(ctx.manifest, cfg.variant);
  if (records.empty()) throw ValidationError("manifest has no " + std::string(variant_str(cfg.variant)) + " clips");
  const ExtractStats st = extract_features(ctx.cache, ctx.manifest, records, cfg.workers);
  log("extract: " + std::to_string(st.computed) + " computed, " + std::to_string(st.skipped) + " up to date (" +
      ctx.cache.dir().string() + ")");
  return st;
}

struct TrainSummary {
  TrainingHistory history;
  double best_val_eer = 1.0;
};

inline TrainSummary cmd_train(const ExperimentConfig& cfg, const Log& log = {}) {
  ExperimentContext ctx(cfg);
  const auto tr = records_for(ctx.manifest, cfg.variant, Partition::Train);
  const auto va = records_for(ctx.manifest, cfg.variant, Partition::Val);
  std::vector<ClipRecord> both = tr;
  both.insert(both.end(), va.begin(), va.end());
  const ExtractStats st = extract_features(ctx.cache, ctx.manifest, both, cfg.workers);
  log("train: features " + std::to_string(st.computed) + " computed, " + std::to_string(st.skipped) + " cached");
  const LabeledSet train_set = load_labeled(ctx.cache, ctx.manifest, tr);
  const LabeledSet val_set = load_labeled(ctx.cache, ctx.manifest, va);
  if (train_set.features.empty()) throw ValidationError("manifest has no Train clips for this variant");

  TrainedHead head = make_trained_head(cfg.head, static_cast<int>(train_set.features.front().dims()), cfg.head_config);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  train(head, train_set, val_set, tc);

  TrainSummary s;
  s.history = head.history;
  for (const auto& e : head.history.epochs) {
    log("train: epoch " + std::to_string(e.epoch) + " loss " + format_double(e.train_loss) + " val EER " +
        format_double(100.0 * e.val_eer) + "%");
    if (e.epoch == head.history.best_epoch) s.best_val_eer = e.val_eer;
  }
  save_head(head_path(cfg), head);
  write_file_atomic(cfg.out_dir / "history.json", to_json(head.history).dump(2) + "\n");
  return s;
}

inline std::string operating_points_csv(const std::vector<ScoredTrial>& trials) {
  std::string out = "threshold,far,frr\n";
  for (const auto& p : operating_points(trials)) {
    out += format_double(p.threshold) + "," + format_double(p.far) + "," + format_double(p.frr) + "\n";
  }
  return out;
}

// Scores clips in fixed chunks of 32, so results do not depend on the
// number of workers.
inline std::vector<double> score_clips(const TrainedHead& head, const FeatureCache& cache, const Manifest& m,
                                       const std::vector<ClipRecord>& records, std::size_t workers) {
  constexpr std::size_t kChunk = 32;
  std::vector<double> scores(records.size());
  const std::size_t chunks = (records.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<std::vector<float>> maps;
    const std::size_t lo = c * kChunk, hi = std::min(records.size(), lo + kChunk);
    for (std::size_t i = lo; i < hi; ++i) maps.push_back(head.prepare(cache.get(m, records[i])));
    const auto s = head.scores(maps);
    std::copy(s.begin(), s.end(), scores.begin() + static_cast<std::ptrdiff_t>(lo));
  });
  return scores;
}

inline PartitionReport evaluate_partition(const TrainedHead& head, const FeatureCache& cache, const Manifest& m,
                                          const std::vector<ClipRecord>& records, Partition p, std::size_t workers,
                                          std::vector<ScoredTrial>* trials_out = nullptr) {
  const auto scores = score_clips(head, cache, m, records, workers);
  std::vector<ScoredTrial> trials;
  for (std::size_t i = 0; i < records.size(); ++i) trials.push_back({records[i].clip_id, records[i].label, scores[i]});
  PartitionReport rep = make_partition_report(p, trials);
  if (trials_out) *trials_out = std::move(trials);
  return rep;
}

// Scores every partition present in the manifest and writes
//   scores/<P>.csv, operating_points/<P>.csv, report.json, results.csv
// under out_dir. Partitions holding a single class are skipped.
inline RunReport cmd_eval(const ExperimentConfig& cfg, const Log& log = {}) {
  ExperimentContext ctx(cfg);
  const TrainedHead head = load_head(head_path(cfg));
  std::vector<PartitionReport> reports;
  for (Partition p : kAllPartitions) {
    const auto records = records_for(ctx.manifest, cfg.variant, p);
    if (records.empty()) continue;
    const ClassCounts counts = [&] {
      ClassCounts c;
      for (const auto& r : records) (r.label == Label::Bonafide ? c.bonafide : c.deepfake)++;
      return c;
    }();
    if (counts.bonafide == 0 || counts.deepfake == 0) {
      log("eval: skipping " + std::string(partition_str(p)) + ", it holds only one class");
      continue;
    }
    extract_features(ctx.cache, ctx.manifest, records, cfg.workers);
    std::vector<ScoredTrial> trials;
    reports.push_back(evaluate_partition(head, ctx.cache, ctx.manifest, records, p, cfg.workers, &trials));
    const std::string part(partition_str(p));
    write_file_atomic(cfg.out_dir / "scores" / (part + ".csv"), encode_scores_csv(trials));
    write_file_atomic(cfg.out_dir / "operating_points" / (part + ".csv"), operating_points_csv(trials));
    log("eval: " + part + " EER " + format_double(reports.back().eer_percent) + "% (" +
        std::to_string(counts.bonafide) + " bonafide, " + std::to_string(counts.deepfake) + " deepfake)");
  }
  if (reports.empty()) throw ValidationError("nothing to evaluate: no partition holds both classes");
  RunReport run = make_run_report(std::string(feature_system_name(cfg.feature)), canonical_head_name(cfg.head),
                                  std::string(variant_str(cfg.variant)), reports);
  if (run.average_test_eer_percent) log("eval: average test EER " + format_double(*run.average_test_eer_percent) + "%");
  write_file_atomic(cfg.out_dir / "report.json", to_json(run).dump(2) + "\n");
  write_file_atomic(cfg.out_dir / "results.csv", results_table_csv({run}));
  return run;
}

// Wide table for one (head, variant): a row per feature system, a column per
// partition plus AVG; cells are EER percent, empty when not evaluated.
inline std::string feature_partition_table_csv(const std::vector<RunReport>& runs) {
  std::string out = "feature";
  for (Partition p : kAllPartitions) out += "," + std::string(partition_str(p));
  out += ",AVG\n";
  for (const auto& r : runs) {
    out += r.feature;
    for (Partition p : kAllPartitions) {
      out += ",";
      for (const auto& pr : r.partitions) {
        if (pr.partition == p) out += format_double(pr.eer_percent);
      }
    }
    out += "," + (r.average_test_eer_percent ? format_double(*r.average_test_eer_percent) : std::string()) + "\n";
  }
  return out;
}

inline std::map<std::string, double> run_conditions(const RunReport& r) {
  std::map<std::string, double> m;
  for (const auto& p : r.partitions) m[std::string(partition_str(p.partition))] = p.eer_percent;
  if (r.average_test_eer_percent) m["AVG"] = *r.average_test_eer_percent;
  return m;
}

// Collects report.json from each run directory and writes
//   results.csv                      every run, long format
//   eer_by_feature_<head>_<variant>.csv   feature x partition grid
//   baseline_<feature>_<head>_<variant>.csv   when a quoted baseline is given
// Returns the files written, relative to out_dir.
inline std::vector<std::string> cmd_report(const std::vector<std::filesystem::path>& run_dirs,
                                           const std::filesystem::path& out_dir,
                                           const std::optional<std::filesystem::path>& quoted_baseline = std::nullopt) {
  if (run_dirs.empty()) throw ValidationError("report: no run directories given");
  std::vector<RunReport> runs;
  for (const auto& d : run_dirs) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(d / "report.json"));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError((d / "report.json").string() + ": " + e.what());
    }
    runs.push_back(run_report_from_json(j));
  }
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file_atomic(out_dir / name, text);
    written.push_back(name);
  };
  emit("results.csv", results_table_csv(runs));
  std::map<std::string, std::vector<RunReport>> groups;
  for (const auto& r : runs) groups[r.head + "_" + r.variant].push_back(r);
  for (const auto& [key, group] : groups) emit("eer_by_feature_" + key + ".csv", feature_partition_table_csv(group));
  if (quoted_baseline) {
    const auto quoted = load_quoted_baseline(*quoted_baseline);
    for (const auto& r : runs) {
      const auto all = run_conditions(r);
      std::map<std::string, double> ours;
      for (const auto& [cond, v] : quoted) {
        if (all.count(cond)) ours[cond] = all.at(cond);
      }
      emit("baseline_" + r.feature + "_" + r.head + "_" + r.variant + ".csv",
           baseline_table_csv(compare_with_quoted_baseline(ours, quoted)));
    }
  }
  return written;
}

// Log power spectrograms (dB) of two clips, trimmed to a common length,
// written as spectro_a.csv / spectro_b.csv (rows = frames, first column the
// frame time) plus spectro.json describing the axes.
inline void cmd_spectro(const std::filesystem::path& a, const std::filesystem::path& b,
                        const std::filesystem::path& out_dir) {
  const StftConfig stft;
  MatrixD sa = log_power_spectrogram_db(load_audio(a, kEncoderSampleRate), stft);
  MatrixD sb = log_power_spectrogram_db(load_audio(b, kEncoderSampleRate), stft);
  const Eigen::Index frames = std::min(sa.rows(), sb.rows());
  const double hop_s = static_cast<double>(stft.hop_length) / kEncoderSampleRate;
  auto table = [&](const MatrixD& s) {
    std::string out = "time_s";
    for (Eigen::Index k = 0; k < s.cols(); ++k) out += "," + format_double(static_cast<double>(k) * kEncoderSampleRate / stft.fft_size);
    out += "\n";
    for (Eigen::Index t = 0; t < frames; ++t) {
      out += format_double(static_cast<double>(t) * hop_s);
      for (Eigen::Index k = 0; k < s.cols(); ++k) out += "," + format_double(s(t, k));
      out += "\n";
    }
    return out;
  };
  write_file_atomic(out_dir / "spectro_a.csv", table(sa));
  write_file_atomic(out_dir / "spectro_b.csv", table(sb));
  const nlohmann::json meta = {{"a", a.filename().string()},
                               {"b", b.filename().string()},
                               {"frames", frames},
                               {"bins", sa.cols()},
                               {"hop_s", hop_s},
                               {"bin_hz", static_cast<double>(kEncoderSampleRate) / stft.fft_size},
                               {"unit", "dB"}};
  write_file_atomic(out_dir / "spectro.json", meta.dump(2) + "\n");
}

}  // namespace svdd
