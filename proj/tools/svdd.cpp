// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

// svdd: feature extraction, head training, evaluation and reporting for
// singing-voice deepfake detection experiments.

#include "svdd/data.hpp"
#include "svdd/pipeline/commands.hpp"
#include "svdd/testing/suites.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>

namespace {

using namespace svdd;

// Flags shared by extract, train and eval. Unset flags leave the config
// (file, then SVDD_* environment) untouched.
struct ExperimentFlags {
  std::string config, manifest, weights, out, cache, variant, feature, head;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--manifest", manifest, "manifest CSV");
    app->add_option("--weights", weights, "encoder weights archive");
    app->add_option("--out", out, "output directory");
    app->add_option("--cache", cache, "feature cache directory (default <out>/cache)");
    app->add_option("--variant", variant, "vocals or mixture");
    app->add_option("--feature", feature, "W-Tiny, W-Base, W-Small, W-Medium, W-Custom, MFCC, LFCC or CQCC");
    app->add_option("--head", head, "CNN or ResNet34");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    apply_env_overrides(c);
    if (!manifest.empty()) c.manifest = manifest;
    if (!weights.empty()) c.weights = weights;
    if (!out.empty()) c.out_dir = out;
    if (!cache.empty()) c.cache_dir = cache;
    if (!variant.empty()) c.variant = parse_variant(variant);
    if (!feature.empty()) c.feature = parse_feature_system(feature);
    if (!head.empty()) c.head = canonical_head_name(head);
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    c.train.seed = c.seed;
    return c;
  }
};

void print_checks(const std::vector<checks::CheckResult>& results) {
  for (const auto& r : results) {
    std::printf("%-4s %-22s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
  }
}

int run(int argc, char** argv) {
  CLI::App app{"singing-voice deepfake detection toolkit"};
  app.require_subcommand(1);
  const Log log{&std::cout};
  std::function<int()> action;

  ExperimentFlags ex;
  auto* extract = app.add_subcommand("extract", "compute and cache features for every clip of the variant");
  ex.attach(extract);
  extract->callback([&] { action = [&] { cmd_extract(ex.resolve(), log); return 0; }; });

  ExperimentFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train a head on the Train partition, selecting on Val");
  tr.attach(train_cmd);
  train_cmd->callback([&] {
    action = [&] {
      const ExperimentConfig c = tr.resolve();
      cmd_train(c, log);
      write_file_atomic(c.out_dir / "experiment.json", to_json(c).dump(2) + "\n");
      return 0;
    };
  });

  ExperimentFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "score every partition and write EER reports");
  ev.attach(eval_cmd);
  eval_cmd->callback([&] { action = [&] { cmd_eval(ev.resolve(), log); return 0; }; });

  std::vector<std::string> run_dirs;
  std::string report_out, baseline;
  auto* report = app.add_subcommand("report", "collect run reports into tables and plot data");
  report->add_option("runs", run_dirs, "run directories holding report.json")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "output directory")->required();
  report->add_option("--baseline", baseline, "quoted baseline EERs (JSON)")->check(CLI::ExistingFile);
  report->callback([&] {
    action = [&] {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      std::optional<std::filesystem::path> b;
      if (!baseline.empty()) b = baseline;
      for (const auto& f : cmd_report(dirs, report_out, b)) log("report: wrote " + f);
      return 0;
    };
  });

  std::string spec_a, spec_b, spec_out;
  auto* spectro = app.add_subcommand("spectro", "aligned log-power spectrograms of two clips");
  spectro->add_option("a", spec_a, "first audio file")->required()->check(CLI::ExistingFile);
  spectro->add_option("b", spec_b, "second audio file")->required()->check(CLI::ExistingFile);
  spectro->add_option("--out", spec_out, "output directory")->required();
  spectro->callback([&] { action = [&] { cmd_spectro(spec_a, spec_b, spec_out); return 0; }; });

  auto* selftest = app.add_subcommand("selftest", "compare core kernels against reference implementations");
  selftest->callback([&] {
    action = [&] {
      const std::vector<checks::CheckResult> results = {
          checks::run_check("filterbank-dct", [] { return checks::filterbank_dct(); }),
          checks::run_check("attention-encoder", [] { return checks::encoder_oracles(64); }),
          checks::run_check("architecture", [] { return checks::architecture_arithmetic(); }),
          checks::run_check("eer-oracle", [] { return checks::eer_oracle(200); }),
          checks::run_check("eer-hand-cases", [] { return checks::eer_hand_cases(); }),
          checks::run_check("grad-check", [] { return checks::grad_checks(); }),
          checks::run_check("manifest-validation", [] { return checks::manifest_validation(); })};
      print_checks(results);
      return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; }) ? 0 : 1;
    };
  });

  std::string layout_size, layout_out;
  auto* layout = app.add_subcommand("layout", "print the tensor layout manifest of an encoder size");
  layout->add_option("--size", layout_size, "tiny, base, small or medium")->required();
  layout->add_option("--out", layout_out, "write to this file instead of stdout");
  layout->callback([&] {
    action = [&] {
      const std::string text = layout_manifest_json(encoder_config(parse_size_name(layout_size))).dump(2) + "\n";
      if (layout_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(layout_out, text);
      }
      return 0;
    };
  });

  EncoderConfig toy;
  toy.size = SizeName::Custom;
  toy.n_blocks = 2;
  toy.d_model = 32;
  toy.n_heads = 4;
  toy.d_ff = 128;
  toy.max_frames = 300;
  std::uint64_t toy_seed = 0;
  std::string toy_out;
  auto* init_toy = app.add_subcommand("init-toy-encoder", "write a seeded random encoder (W-Custom) archive");
  init_toy->add_option("--out", toy_out, "archive path")->required();
  init_toy->add_option("--seed", toy_seed, "weight seed");
  init_toy->add_option("--blocks", toy.n_blocks, "transformer blocks")->capture_default_str();
  init_toy->add_option("--d-model", toy.d_model, "model width")->capture_default_str();
  init_toy->add_option("--heads", toy.n_heads, "attention heads")->capture_default_str();
  init_toy->add_option("--d-ff", toy.d_ff, "feed-forward width")->capture_default_str();
  init_toy->add_option("--max-frames", toy.max_frames, "mel frames per clip (pad or trim)")->capture_default_str();
  init_toy->callback([&] {
    action = [&] {
      save_archive(toy_out, encoder_to_archive(random_encoder(toy, toy_seed)));
      log("init-toy-encoder: " + std::to_string(parameter_count(encoder_layout(toy))) + " parameters -> " + toy_out);
      return 0;
    };
  });

  std::string synth_config, synth_out, synth_codecs, synth_variant;
  std::optional<std::uint64_t> synth_seed;
  std::optional<double> synth_sep;
  std::size_t synth_workers = 1;
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic surrogate corpus and its manifest");
  gen->add_option("--config", synth_config, "surrogate config (JSON)")->check(CLI::ExistingFile);
  gen->add_option("--out", synth_out, "output directory")->required();
  gen->add_option("--codecs", synth_codecs, "codec registry (JSON), default built-in codecs")->check(CLI::ExistingFile);
  gen->add_option("--variant", synth_variant, "vocals or mixture");
  gen->add_option("--seed", synth_seed, "corpus seed");
  gen->add_option("--separability", synth_sep, "class cue strength in [0, 1]");
  gen->add_option("--workers", synth_workers, "worker threads")->check(CLI::PositiveNumber);
  gen->callback([&] {
    action = [&] {
      SurrogateConfig c;
      if (!synth_config.empty()) c = surrogate_config_from_json(nlohmann::json::parse(read_file(synth_config)));
      if (!synth_variant.empty()) c.variant = parse_variant(synth_variant);
      if (synth_seed) c.seed = *synth_seed;
      if (synth_sep) c.separability = *synth_sep;
      const CodecRegistry reg = synth_codecs.empty() ? builtin_codec_registry() : load_codec_registry(synth_codecs);
      const Manifest m = generate_surrogate(c, synth_out, reg, synth_workers);
      log("gen-synth: " + std::to_string(m.records.size()) + " clips -> " + (std::filesystem::path(synth_out) / "manifest.csv").string());
      return 0;
    };
  });

  std::string val_manifest, val_out;
  bool ignore_missing = false;
  auto* validate = app.add_subcommand("validate", "check a manifest against the reference corpus layout");
  validate->add_option("--manifest", val_manifest, "manifest CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--out", val_out, "write the JSON report here");
  validate->add_flag("--ignore-missing-audio", ignore_missing, "check metadata only");
  validate->callback([&] {
    action = [&] {
      const Manifest m = load_manifest(val_manifest);
      const ValidationReport rep = validate_against_reference(m);
      const std::string text = to_json(rep).dump(2) + "\n";
      if (!val_out.empty()) write_file_atomic(val_out, text);
      std::cout << text;
      const auto missing = ignore_missing ? std::vector<std::string>{} : m.missing_audio();
      if (!missing.empty()) std::cerr << "svdd: " << missing.size() << " clip(s) have no audio file\n";
      return rep.ok() && missing.empty() ? 0 : 1;
    };
  });

  std::string seg_audio, seg_out;
  VadConfig vad;
  auto* segment = app.add_subcommand("segment", "cut a recording into clips with the energy VAD");
  segment->add_option("audio", seg_audio, "input audio")->required()->check(CLI::ExistingFile);
  segment->add_option("--out", seg_out, "write numbered clips and segments.json here");
  segment->add_option("--threshold-db", vad.energy_threshold_db, "energy threshold relative to clip RMS")->capture_default_str();
  segment->add_option("--min-speech", vad.min_speech_s, "shortest kept segment (s)")->capture_default_str();
  segment->add_option("--max-clip", vad.max_clip_s, "longest clip (s)")->capture_default_str();
  segment->add_option("--merge-gap", vad.merge_gap_s, "merge segments closer than this (s)")->capture_default_str();
  segment->callback([&] {
    action = [&] {
      const Waveform w = load_audio(seg_audio, kEncoderSampleRate);
      const auto intervals = segment_by_vad(w, vad);
      nlohmann::json j = nlohmann::json::array();
      const std::string stem = std::filesystem::path(seg_audio).stem().string();
      for (std::size_t i = 0; i < intervals.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "_%03zu.wav", i);
        j.push_back({{"clip", stem + name}, {"start_s", intervals[i].start_s}, {"end_s", intervals[i].end_s}});
        if (seg_out.empty()) continue;
        const auto a = static_cast<std::size_t>(std::llround(intervals[i].start_s * w.sample_rate));
        const auto b = std::min(w.samples.size(), static_cast<std::size_t>(std::llround(intervals[i].end_s * w.sample_rate)));
        Waveform clip;
        clip.sample_rate = w.sample_rate;
        clip.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(a), w.samples.begin() + static_cast<std::ptrdiff_t>(b));
        write_wav(std::filesystem::path(seg_out) / (stem + name), clip);
      }
      if (!seg_out.empty()) write_file_atomic(std::filesystem::path(seg_out) / "segments.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
      return 0;
    };
  });

  std::string t03_manifest, t03_codecs_cfg, t03_out;
  std::vector<std::string> t03_codecs;
  std::size_t t03_workers = 1;
  auto* t03 = app.add_subcommand("build-t03", "render the codec-degraded T03 partition from T02");
  t03->add_option("--manifest", t03_manifest, "manifest holding T02")->required()->check(CLI::ExistingFile);
  t03->add_option("--codecs", t03_codecs_cfg, "codec registry (JSON), default built-in codecs")->check(CLI::ExistingFile);
  t03->add_option("--use", t03_codecs, "the four codec tags")->expected(kT03CodecCount);
  t03->add_option("--out", t03_out, "output directory")->required();
  t03->add_option("--workers", t03_workers, "worker threads")->check(CLI::PositiveNumber);
  t03->callback([&] {
    action = [&] {
      const Manifest m = load_manifest(t03_manifest);
      const CodecRegistry reg = t03_codecs_cfg.empty() ? builtin_codec_registry() : load_codec_registry(t03_codecs_cfg);
      std::vector<std::string> use = t03_codecs;
      if (use.empty()) {
        use = reg.tags();
        if (use.size() > static_cast<std::size_t>(kT03CodecCount)) use.resize(kT03CodecCount);
      }
      const T03RenderResult r = render_t03(m, reg, use, t03_out, t03_workers);
      for (const auto& w : r.warnings) std::cerr << "svdd: warning: " << w << "\n";
      write_manifest(std::filesystem::path(t03_out) / "t03.csv", r.records);
      log("build-t03: " + std::to_string(r.records.size()) + " clips, " + std::to_string(r.warnings.size()) + " skipped");
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return action ? action() : 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const svdd::Error& e) {
    std::cerr << "svdd: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "svdd: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "svdd: " << e.what() << "\n";
    return 1;
  }
}
