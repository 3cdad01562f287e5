// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "svdd/eval/report.hpp"
#include "svdd/testing/eval_oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace svdd {
namespace {

std::vector<ScoredTrial> trials(const std::vector<double>& bona, const std::vector<double>& fake) {
  std::vector<ScoredTrial> out;
  for (double s : bona) out.push_back({"b" + std::to_string(out.size()), Label::Bonafide, s});
  for (double s : fake) out.push_back({"f" + std::to_string(out.size()), Label::Deepfake, s});
  return out;
}

std::vector<ScoredTrial> random_trials(std::mt19937_64& rng) {
  const std::size_t n = 2 + rng() % 999;
  std::vector<ScoredTrial> out(n);
  const bool coarse = rng() % 3 == 0;  // many ties
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = i == 0 ? Label::Bonafide : i == 1 ? Label::Deepfake : (rng() % 2 ? Label::Bonafide : Label::Deepfake);
    double s = uniform_draw(rng) + (out[i].label == Label::Bonafide ? 0.3 * uniform_draw(rng) : 0.0);
    if (coarse) s = std::round(s * 10.0) / 10.0;
    out[i].score = std::clamp(s, 0.0, 1.0);
  }
  return out;
}

TEST(Eer, HandCases) {
  EXPECT_EQ(compute_eer(trials({0.9, 0.8}, {0.1, 0.2})).eer, 0.0);
  EXPECT_EQ(compute_eer(trials({0.1, 0.9}, {0.1, 0.9})).eer, 0.5);
  EXPECT_DOUBLE_EQ(compute_eer(trials({0.6, 0.4, 0.8}, {0.5, 0.3, 0.2})).eer, 1.0 / 3.0);
}

TEST(Eer, InterpolatesBetweenOperatingPoints) {
  // Bonafide {0.3, 0.4}, deepfake {0.1, 0.35}: t = 0.35 gives FAR = FRR = 1/2.
  EXPECT_DOUBLE_EQ(compute_eer(trials({0.3, 0.4}, {0.1, 0.35})).eer, 0.5);
  // Bonafide {0.2, 0.6, 0.7}, deepfake {0.1, 0.5}: (FAR, FRR) goes from
  // (1/2, 1/3) at t = 0.5 to (0, 1/3) at t = 0.6; FRR is flat across the
  // crossing.
  EXPECT_NEAR(compute_eer(trials({0.2, 0.6, 0.7}, {0.1, 0.5})).eer, 1.0 / 3.0, 1e-15);
  // Bonafide {0.5, 0.9, 0.95}, deepfake {0.1, 0.5}: (1/2, 0) at t = 0.5 to
  // (0, 1/3) at t = 0.9, both rates move; the segment meets the diagonal at
  // 0.6 of the way, FAR = FRR = 0.2.
  const auto r = compute_eer(trials({0.5, 0.9, 0.95}, {0.1, 0.5}));
  EXPECT_NEAR(r.eer, 0.2, 1e-15);
  EXPECT_NEAR(r.threshold, 0.5 + 0.6 * 0.4, 1e-15);
}

TEST(Eer, TiesAreAcceptedAsBonafide) {
  const auto r = compute_eer(trials({0.5}, {0.5}));
  // At t = 0.5 both are accepted: FAR 1, FRR 0; above it FAR 0, FRR 1.
  EXPECT_DOUBLE_EQ(r.eer, 0.5);
}

TEST(Eer, ThresholdSeparatesPerfectSets) {
  const auto r = compute_eer(trials({0.9, 0.8}, {0.1, 0.2}));
  EXPECT_GT(r.threshold, 0.2);
  EXPECT_LE(r.threshold, 0.8);
}

TEST(Eer, SingleClassRejected) {
  EXPECT_THROW(compute_eer(trials({0.1, 0.2}, {})), ValidationError);
  EXPECT_THROW(compute_eer(trials({}, {0.1})), ValidationError);
  EXPECT_THROW(compute_eer(trials({std::nan("")}, {0.1})), ValidationError);
}

TEST(Eer, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 200; ++k) {
    const auto t = random_trials(rng);
    ASSERT_NEAR(compute_eer(t).eer, oracle::brute_force_eer(t), 1e-9) << "set " << k;
  }
}

TEST(Eer, MonotoneTransformInvariance) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    auto t = random_trials(rng);
    const double base = compute_eer(t).eer;
    for (auto& x : t) x.score = std::exp(3.0 * x.score) - 7.0;
    EXPECT_NEAR(compute_eer(t).eer, base, 1e-12);
  }
}

TEST(Eer, LabelSwapSymmetry) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    auto t = random_trials(rng);
    const double base = compute_eer(t).eer;
    for (auto& x : t) {
      x.label = x.label == Label::Bonafide ? Label::Deepfake : Label::Bonafide;
      x.score = 1.0 - x.score;
    }
    EXPECT_NEAR(compute_eer(t).eer, base, 1e-12);
  }
}

TEST(Eer, InUnitRangeAndBoundedForSensibleScores) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const auto t = random_trials(rng);
    const double e = compute_eer(t).eer;
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0);
  }
  // Inverted detector: every deepfake above every bonafide.
  EXPECT_DOUBLE_EQ(compute_eer(trials({0.1, 0.2}, {0.8, 0.9})).eer, 1.0);
}

PartitionReport rep(Partition p, double e) {
  PartitionReport r;
  r.partition = p;
  r.eer_percent = e;
  return r;
}

TEST(Average, UnweightedMeanOfFourTests) {
  EXPECT_DOUBLE_EQ(average_test_eer({rep(Partition::T01, 3), rep(Partition::T02, 3), rep(Partition::T03, 3),
                                     rep(Partition::T04, 3)}),
                   3.0);
  std::vector<PartitionReport> r = {rep(Partition::T01, 1.09), rep(Partition::T02, 4.0), rep(Partition::T03, 5.0),
                                    rep(Partition::T04, 9.35)};
  const double avg = average_test_eer(r);
  EXPECT_NEAR(avg, 4.86, 1e-12);
  std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.eer_percent > b.eer_percent; });
  EXPECT_EQ(average_test_eer(r), avg);
}

TEST(Average, RequiresExactlyTheFourTests) {
  EXPECT_THROW(average_test_eer({rep(Partition::T01, 1), rep(Partition::T02, 1), rep(Partition::T03, 1)}),
               ValidationError);
  EXPECT_THROW(average_test_eer({rep(Partition::T01, 1), rep(Partition::T01, 1), rep(Partition::T03, 1),
                                 rep(Partition::T04, 1)}),
               ValidationError);
  EXPECT_THROW(average_test_eer({rep(Partition::Val, 1), rep(Partition::T02, 1), rep(Partition::T03, 1),
                                 rep(Partition::T04, 1)}),
               ValidationError);
}

TEST(PartitionReport, CountsClasses) {
  const auto r = make_partition_report(Partition::T02, trials({0.9, 0.8, 0.7}, {0.1}));
  EXPECT_EQ(r.n_bonafide, 3u);
  EXPECT_EQ(r.n_deepfake, 1u);
  EXPECT_EQ(r.eer_percent, 0.0);
}

TEST(Baseline, AbsoluteDifferences) {
  const auto rows = compare_with_quoted_baseline({{"T01", 2.0}, {"T02", 10.0}}, {{"T01", 5.5}, {"T02", 4.0}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].abs_diff, 3.5);
  EXPECT_DOUBLE_EQ(rows[1].abs_diff, 6.0);
  EXPECT_THROW(compare_with_quoted_baseline({{"T01", 2.0}}, {{"T01", 5.5}, {"T02", 4.0}}), ValidationError);
  EXPECT_THROW(compare_with_quoted_baseline({{"T01", 2.0}, {"T03", 1.0}}, {{"T01", 5.5}}), ValidationError);
  const std::string csv = baseline_table_csv(rows);
  EXPECT_EQ(csv, "condition,ours_eer_percent,quoted_eer_percent,abs_diff\nT01,2,5.5,3.5\nT02,10,4,6\n");
}

TEST(ScoreFile, RoundTripIsExact) {
  std::mt19937_64 rng(10);
  auto t = random_trials(rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i].clip_id = "clip_" + std::to_string(i);
  t[0].score = 0.1 + 0.2;  // needs all 17 digits
  const std::string csv = encode_scores_csv(t);
  const auto back = decode_scores_csv(csv);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back[i].clip_id, t[i].clip_id);
    EXPECT_EQ(back[i].label, t[i].label);
    EXPECT_EQ(back[i].score, t[i].score);
  }
  EXPECT_EQ(encode_scores_csv(back), csv);
}

TEST(ScoreFile, Errors) {
  EXPECT_THROW(decode_scores_csv("id,label,score\n"), FormatError);
  EXPECT_THROW(decode_scores_csv("clip_id,label,score\na,bonafide\n"), FormatError);
  EXPECT_THROW(decode_scores_csv("clip_id,label,score\na,maybe,0.5\n"), FormatError);
  EXPECT_THROW(decode_scores_csv("clip_id,label,score\na,bonafide,0.5x\n"), FormatError);
  EXPECT_THROW(encode_scores_csv({{"a,b", Label::Bonafide, 0.5}}), ValidationError);
}

TEST(RunReport, JsonRoundTripAndTable) {
  std::vector<PartitionReport> parts = {rep(Partition::Val, 2.5), rep(Partition::T01, 1), rep(Partition::T02, 2),
                                        rep(Partition::T03, 3), rep(Partition::T04, 6)};
  const RunReport r = make_run_report("MFCC", "CNN", "vocals", parts);
  ASSERT_TRUE(r.average_test_eer_percent.has_value());
  EXPECT_DOUBLE_EQ(*r.average_test_eer_percent, 3.0);
  const RunReport back = run_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  const std::string table = results_table_csv({r});
  EXPECT_NE(table.find("MFCC,CNN,vocals,T04,6\n"), std::string::npos);
  EXPECT_NE(table.find("MFCC,CNN,vocals,AVG,3\n"), std::string::npos);
  const RunReport partial = make_run_report("MFCC", "CNN", "vocals", {rep(Partition::Val, 1)});
  EXPECT_FALSE(partial.average_test_eer_percent.has_value());
}

}  // namespace
}  // namespace svdd
