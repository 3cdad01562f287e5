// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "svdd/encoder/model.hpp"
#include "svdd/features.hpp"
#include "svdd/testing/encoder_oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace svdd {
namespace {

MatrixF random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  MatrixF m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(scale * normal_draw(rng));
  return m;
}

EncoderConfig toy_config(int frames = 8) {
  EncoderConfig c;
  c.size = SizeName::Custom;
  c.n_blocks = 2;
  c.d_model = 16;
  c.n_heads = 4;
  c.d_ff = 64;
  c.n_mels = 80;
  c.max_frames = frames;
  return c;
}

FeatureMatrix random_mel(int frames, int bins, std::uint64_t seed) {
  FeatureMatrix f;
  f.values = random_matrix(frames, bins, seed).cast<double>();
  f.kind = FeatureKind::LogMel;
  f.frame_rate = 100.0;
  f.source_clip = "clip" + std::to_string(seed);
  return f;
}

TEST(Attention, ZeroQueryAndKeyAveragesValues) {
  const MatrixF q = MatrixF::Zero(3, 2), k = MatrixF::Zero(3, 2);
  MatrixF v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  const MatrixF out = scaled_dot_attention(q, k, v);
  for (int r = 0; r < 3; ++r) {
    EXPECT_NEAR(out(r, 0), 3.0f, 1e-6f);
    EXPECT_NEAR(out(r, 1), 4.0f, 1e-6f);
  }
}

TEST(Attention, SingleFrameReturnsValue) {
  const MatrixF q = random_matrix(1, 4, 1), k = random_matrix(1, 4, 2), v = random_matrix(1, 4, 3);
  const MatrixF out = scaled_dot_attention(q, k, v);
  EXPECT_LT((out - v).cwiseAbs().maxCoeff(), 1e-7f);
}

TEST(Attention, SeededMatchesNaive) {
  const MatrixF q = random_matrix(3, 2, 11), k = random_matrix(3, 2, 12), v = random_matrix(3, 2, 13);
  const auto ref = oracle::attention(oracle::to_grid(q), oracle::to_grid(k), oracle::to_grid(v));
  EXPECT_LT(oracle::max_abs_diff(scaled_dot_attention(q, k, v), ref), 1e-6);
}

TEST(Attention, OutputRowsAreConvexCombinations) {
  // Rows of the attention matrix sum to one, so adding a constant row to V
  // shifts every output row by exactly that constant.
  const MatrixF q = random_matrix(6, 4, 21), k = random_matrix(6, 4, 22), v = random_matrix(6, 4, 23);
  RowVectorF shift(4);
  shift << 1.5f, -2.0f, 0.25f, 3.0f;
  MatrixF v2 = v;
  v2.rowwise() += shift;
  MatrixF diff = scaled_dot_attention(q, k, v2) - scaled_dot_attention(q, k, v);
  diff.rowwise() -= shift;
  EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-5f);
  const MatrixF ones = MatrixF::Ones(6, 1);
  EXPECT_LT((scaled_dot_attention(q, k, ones) - ones).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(Attention, ShapeErrors) {
  EXPECT_THROW(scaled_dot_attention(MatrixF::Zero(2, 3), MatrixF::Zero(2, 4), MatrixF::Zero(2, 3)), ShapeError);
  EXPECT_THROW(scaled_dot_attention(MatrixF::Zero(2, 3), MatrixF::Zero(2, 3), MatrixF::Zero(3, 3)), ShapeError);
}

Linear identity_linear(int d) { return {MatrixF::Identity(d, d), RowVectorF::Zero(d)}; }

Linear random_linear(int out, int in, std::uint64_t seed) {
  return {random_matrix(out, in, seed, 1.0 / std::sqrt(static_cast<double>(in))), random_matrix(1, out, seed + 1, 0.1)};
}

AttentionWeights random_attention(int d, std::uint64_t seed) {
  return {random_linear(d, d, seed), random_linear(d, d, seed + 10), random_linear(d, d, seed + 20),
          random_linear(d, d, seed + 30)};
}

TEST(MultiHead, SingleHeadWithIdentityProjectionsIsPlainAttention) {
  const MatrixF x = random_matrix(5, 6, 31);
  AttentionWeights w{identity_linear(6), identity_linear(6), identity_linear(6), identity_linear(6)};
  EXPECT_LT((multi_head_self_attention(x, w, 1) - scaled_dot_attention(x, x, x)).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(MultiHead, HeadPermutationSymmetry) {
  // Permuting heads consistently in Q/K/V rows and in the output columns
  // leaves the result unchanged.
  const int d = 8, h = 4, hd = 2;
  const MatrixF x = random_matrix(5, d, 41);
  const AttentionWeights w = random_attention(d, 42);
  const int perm[h] = {2, 0, 3, 1};
  AttentionWeights p = w;
  for (int i = 0; i < h; ++i) {
    for (Linear AttentionWeights::*proj : {&AttentionWeights::query, &AttentionWeights::key, &AttentionWeights::value}) {
      (p.*proj).weight.middleRows(i * hd, hd) = (w.*proj).weight.middleRows(perm[i] * hd, hd);
      (p.*proj).bias.segment(i * hd, hd) = (w.*proj).bias.segment(perm[i] * hd, hd);
    }
    p.out.weight.middleCols(i * hd, hd) = w.out.weight.middleCols(perm[i] * hd, hd);
  }
  EXPECT_LT((multi_head_self_attention(x, w, h) - multi_head_self_attention(x, p, h)).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(MultiHead, SeededMatchesHeadLoopOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int d = 16, heads = seed % 2 ? 4 : 2;
    const MatrixF x = random_matrix(1 + static_cast<int>(seed % 8), d, 100 + seed);
    const AttentionWeights w = random_attention(d, 200 + seed);
    const auto ref = oracle::mhsa(oracle::to_grid(x), w, heads);
    EXPECT_LT(oracle::max_abs_diff(multi_head_self_attention(x, w, heads), ref), 1e-5) << "seed " << seed;
  }
}

TEST(MultiHead, RejectsIndivisibleHeads) {
  const AttentionWeights w = random_attention(6, 1);
  EXPECT_THROW(multi_head_self_attention(random_matrix(2, 6, 2), w, 4), ShapeError);
}

TEST(LayerNorm, UnitGainGivesZeroMeanUnitVariance) {
  const MatrixF x = random_matrix(7, 32, 51, 5.0);
  const MatrixF y = layer_norm(x, {RowVectorF::Ones(32), RowVectorF::Zero(32)});
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0f, 1e-5f);
    EXPECT_NEAR((y.row(r).array() - y.row(r).mean()).square().mean(), 1.0f, 1e-3f);
  }
}

TEST(Gelu, KnownValues) {
  EXPECT_FLOAT_EQ(gelu(0.0f), 0.0f);
  EXPECT_NEAR(gelu(1.0f), 0.8413447f, 1e-6f);
  EXPECT_NEAR(gelu(-1.0f), -0.1586553f, 1e-6f);
  EXPECT_NEAR(gelu(6.0f), 6.0f, 1e-5f);
}

BlockWeights random_block(int d, int f, std::uint64_t seed) {
  BlockWeights b;
  b.attn_ln = {RowVectorF::Ones(d) + random_matrix(1, d, seed, 0.1), random_matrix(1, d, seed + 1, 0.1)};
  b.attn = random_attention(d, seed + 2);
  b.mlp_ln = {RowVectorF::Ones(d) + random_matrix(1, d, seed + 50, 0.1), random_matrix(1, d, seed + 51, 0.1)};
  b.fc1 = random_linear(f, d, seed + 60);
  b.fc2 = random_linear(d, f, seed + 70);
  return b;
}

TEST(Block, ZeroSublayersPassInputThrough) {
  const int d = 8, f = 32;
  BlockWeights b = random_block(d, f, 61);
  b.attn.out = {MatrixF::Zero(d, d), RowVectorF::Zero(d)};
  b.fc2 = {MatrixF::Zero(d, f), RowVectorF::Zero(d)};
  const MatrixF x = random_matrix(4, d, 62);
  EXPECT_LT((transformer_block(x, b, 2) - x).cwiseAbs().maxCoeff(), 1e-7f);
}

TEST(Block, MatchesStraightLineOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int d = 16, f = 64;
    const BlockWeights b = random_block(d, f, 300 + seed * 100);
    const MatrixF x = random_matrix(8, d, 700 + seed);
    EXPECT_LT(oracle::max_abs_diff(transformer_block(x, b, 4), oracle::block(oracle::to_grid(x), b, 4)), 1e-5);
  }
}

TEST(Block, NonFiniteWeightsRaise) {
  BlockWeights b = random_block(8, 32, 5);
  b.fc1.weight(0, 0) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(transformer_block(random_matrix(3, 8, 6), b, 2), NumericError);
}

Conv1dWeights random_conv(int out, int in, std::uint64_t seed) {
  return {random_matrix(out, in * 3, seed, 1.0 / std::sqrt(3.0 * in)), random_matrix(1, out, seed + 1, 0.1), 3};
}

TEST(ConvStem, HalvesFrameCount) {
  const Conv1dWeights c1 = random_conv(4, 80, 71), c2 = random_conv(4, 4, 72);
  EXPECT_EQ(conv_stem(MatrixF::Zero(3000, 80), c1, c2).rows(), 1500);
  EXPECT_EQ(conv_stem(MatrixF::Zero(7, 80), c1, c2).rows(), 4);
  EXPECT_EQ(conv_stem(MatrixF::Zero(1, 80), c1, c2).rows(), 1);
}

TEST(ConvStem, ZeroInputZeroBiasGivesZero) {
  Conv1dWeights c1 = random_conv(4, 80, 73), c2 = random_conv(4, 4, 74);
  c1.bias.setZero();
  c2.bias.setZero();
  EXPECT_EQ(conv_stem(MatrixF::Zero(20, 80), c1, c2).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(ConvStem, MatchesDirectConvolution) {
  const Conv1dWeights c1 = random_conv(6, 10, 75), c2 = random_conv(6, 6, 76);
  const MatrixF mel = random_matrix(13, 10, 77);
  EXPECT_LT(oracle::max_abs_diff(conv_stem(mel, c1, c2), oracle::conv_stem(oracle::to_grid(mel), c1, c2)), 1e-6);
}

TEST(Positions, KnownEntriesAndBounds) {
  const MatrixF p = sinusoidal_positions(1500, 384);
  for (int i = 0; i < 192; ++i) {
    EXPECT_EQ(p(0, i), 0.0f);
    EXPECT_EQ(p(0, 192 + i), 1.0f);
  }
  // Highest-frequency pair has unit angular rate.
  EXPECT_NEAR(p(1, 0), 0.8414710f, 1e-6f);
  EXPECT_NEAR(p(1, 192), 0.5403023f, 1e-6f);
  EXPECT_LE(p.cwiseAbs().maxCoeff(), 1.0f);
  // Lowest-frequency pair has rate 1/10000.
  EXPECT_NEAR(p(1000, 191), std::sin(1000.0 / 10000.0), 1e-6);
  for (Eigen::Index t = 0; t < p.rows(); t += 97) {
    for (int i = 0; i < 192; i += 13) {
      EXPECT_NEAR(p(t, i) * p(t, i) + p(t, 192 + i) * p(t, 192 + i), 1.0f, 1e-5f);
    }
  }
}

TEST(Config, PresetsAndParameterCounts) {
  const std::pair<SizeName, std::array<int, 3>> presets[] = {{SizeName::Tiny, {4, 384, 6}},
                                                             {SizeName::Base, {6, 512, 8}},
                                                             {SizeName::Small, {12, 768, 12}},
                                                             {SizeName::Medium, {24, 1024, 16}}};
  for (const auto& [size, dims] : presets) {
    const EncoderConfig c = encoder_config(size);
    EXPECT_EQ(c.n_blocks, dims[0]);
    EXPECT_EQ(c.d_model, dims[1]);
    EXPECT_EQ(c.n_heads, dims[2]);
    EXPECT_EQ(c.head_dim(), 64);
    EXPECT_EQ(c.output_frames(), 1500);
    const std::int64_t d = c.d_model, f = c.d_ff, m = c.n_mels;
    const std::int64_t stem = d * m * 3 + d + d * d * 3 + d;
    const std::int64_t block = 4 * d + 4 * (d * d + d) + (f * d + f) + (d * f + d);
    EXPECT_EQ(parameter_count(encoder_layout(c)), stem + c.n_blocks * block + 2 * d);
  }
  EXPECT_EQ(parameter_count(encoder_layout(encoder_config(SizeName::Tiny))), 7633920);
  EXPECT_THROW(encoder_config(SizeName::Custom), ValidationError);
  EncoderConfig bad = encoder_config(SizeName::Base);
  bad.n_blocks = 5;
  EXPECT_THROW(bad.require_valid(), ValidationError);
  EXPECT_EQ(encoder_config_from_json(to_json(encoder_config(SizeName::Small))), encoder_config(SizeName::Small));
}

TEST(Config, ShippedLayoutManifestsMatch) {
  for (SizeName s : {SizeName::Tiny, SizeName::Base, SizeName::Small, SizeName::Medium}) {
    const std::string path = std::string(SVDD_SOURCE_DIR) + "/models/layout_" + std::string(size_name_str(s)) + ".json";
    const auto shipped = nlohmann::json::parse(read_file(path));
    EXPECT_EQ(shipped, layout_manifest_json(encoder_config(s))) << path;
  }
}

TEST(Encode, ShapeAndDeterminism) {
  const EncoderConfig cfg = toy_config(40);
  const EncoderModel m = random_encoder(cfg, 7);
  const FeatureMatrix mel = random_mel(25, 80, 8);
  const Encoding a = encode(mel, m);
  const Encoding b = encode(mel, m);
  EXPECT_EQ(a.values.rows(), 20);
  EXPECT_EQ(a.values.cols(), 16);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.source_clip, mel.source_clip);
  const FeatureMatrix f = a.as_features();
  EXPECT_EQ(f.kind, FeatureKind::Encoding);
  EXPECT_DOUBLE_EQ(f.frame_rate, 50.0);
}

TEST(Encode, MatchesStraightLineOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const EncoderConfig cfg = toy_config(8);
    const EncoderModel m = random_encoder(cfg, 900 + seed);
    const FeatureMatrix mel = random_mel(6 + static_cast<int>(seed), 80, 950 + seed);
    const MatrixF fitted = fit_mel_frames(mel, cfg.max_frames);
    EXPECT_LT(oracle::max_abs_diff(encode(mel, m).values, oracle::encode(fitted, m)), 1e-5) << "seed " << seed;
  }
}

TEST(Encode, FitMelFramesPadsWithSilenceLevel) {
  FeatureMatrix mel = random_mel(4, 80, 3);
  mel.values.setConstant(-1.5);
  mel.values(0, 0) = 1.0;
  const MatrixF fitted = fit_mel_frames(mel, 10);
  EXPECT_EQ(fitted.rows(), 10);
  EXPECT_FLOAT_EQ(fitted(9, 5), -1.0f);
  mel.values.setConstant(-1.5);
  EXPECT_FLOAT_EQ(fit_mel_frames(mel, 10)(9, 5), -1.5f);
  EXPECT_EQ(fit_mel_frames(random_mel(30, 80, 4), 10).rows(), 10);
}

TEST(Encode, RealAudioThroughToyEncoder) {
  // One second of a tone through the full mel front end and a toy encoder.
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = 0.3f * std::sin(2 * M_PI * 440.0 * i / 16000.0);
  const FeatureMatrix mel = log_mel_spectrogram(w);
  EncoderConfig cfg = toy_config(100);
  const Encoding e = encode(mel, random_encoder(cfg, 1));
  EXPECT_EQ(e.values.rows(), 50);
  EXPECT_TRUE(e.values.allFinite());
}

TEST(Encode, RejectsWrongInputs) {
  const EncoderModel m = random_encoder(toy_config(8), 1);
  FeatureMatrix mel = random_mel(8, 40, 2);
  EXPECT_THROW(encode(mel, m), ShapeError);
  mel = random_mel(8, 80, 2);
  mel.kind = FeatureKind::MFCC;
  EXPECT_THROW(encode(mel, m), ValidationError);
}

TEST(Encode, BatchMatchesSequential) {
  const EncoderModel m = random_encoder(toy_config(16), 5);
  std::vector<FeatureMatrix> mels;
  for (int i = 0; i < 5; ++i) mels.push_back(random_mel(10 + i, 80, 60 + static_cast<std::uint64_t>(i)));
  const auto batch = encode_batch(mels, m, 3);
  for (std::size_t i = 0; i < mels.size(); ++i) EXPECT_EQ(batch[i].values, encode(mels[i], m).values);
}

TEST(Encode, ArchiveRoundTripPreservesOutput) {
  const EncoderConfig cfg = toy_config(12);
  const EncoderModel m = random_encoder(cfg, 17);
  const auto path = std::filesystem::temp_directory_path() / "svdd_test_encoder.svdt";
  save_archive(path, encoder_to_archive(m));
  const EncoderModel loaded = load_encoder(path);
  EXPECT_EQ(loaded.config, cfg);
  const FeatureMatrix mel = random_mel(12, 80, 18);
  EXPECT_EQ(encode(mel, loaded).values, encode(mel, m).values);
  EXPECT_EQ(load_weights(path, cfg).config, cfg);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace svdd
