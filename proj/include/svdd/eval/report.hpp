// SPDX-FileCopyrightText: Copyright (c) 2026 The svdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svdd/common.hpp"
#include "svdd/eval/eer.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace svdd {

struct PartitionReport {
  Partition partition = Partition::Val;
  double eer_percent = 0.0;
  double threshold = 0.0;
  std::size_t n_bonafide = 0;
  std::size_t n_deepfake = 0;
};

inline PartitionReport make_partition_report(Partition p, const std::vector<ScoredTrial>& trials) {
  const EerResult r = compute_eer(trials);
  PartitionReport rep;
  rep.partition = p;
  rep.eer_percent = 100.0 * r.eer;
  rep.threshold = r.threshold;
  for (const auto& t : trials) (t.label == Label::Bonafide ? rep.n_bonafide : rep.n_deepfake) += 1;
  return rep;
}

// Unweighted mean of the four test-condition EERs, in percent. Requires each
// of T01..T04 exactly once.
inline double average_test_eer(const std::vector<PartitionReport>& reports) {
  std::map<Partition, double> seen;
  for (const auto& r : reports) {
    if (r.partition == Partition::Train || r.partition == Partition::Val) {
      throw ValidationError("average_test_eer: unexpected " + std::string(partition_str(r.partition)) + " report");
    }
    if (!seen.emplace(r.partition, r.eer_percent).second) {
      throw ValidationError("average_test_eer: duplicate " + std::string(partition_str(r.partition)) + " report");
    }
  }
  if (seen.size() != 4) throw ValidationError("average_test_eer: need exactly the four test reports T01..T04");
  double sum = 0.0;
  for (Partition p : kTestPartitions) sum += seen.at(p);
  return sum / 4.0;
}

struct BaselineDelta {
  std::string condition;
  double ours_percent;
  double quoted_percent;
  double abs_diff;
};

// Absolute EER differences per condition. Both sides must cover the same
// conditions.
inline std::vector<BaselineDelta> compare_with_quoted_baseline(const std::map<std::string, double>& ours,
                                                               const std::map<std::string, double>& quoted) {
  for (const auto& [c, v] : ours) {
    if (!quoted.count(c)) throw ValidationError("baseline comparison: condition '" + c + "' has no quoted value");
  }
  for (const auto& [c, v] : quoted) {
    if (!ours.count(c)) throw ValidationError("baseline comparison: condition '" + c + "' missing from our results");
  }
  std::vector<BaselineDelta> out;
  for (const auto& [c, v] : ours) out.push_back({c, v, quoted.at(c), std::abs(v - quoted.at(c))});
  return out;
}

// Quoted-baseline file: {"source": "...", "conditions": {"T01": 12.3, ...}}
// with EERs in percent.
inline std::map<std::string, double> load_quoted_baseline(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    return j.at("conditions").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---- score files -----------------------------------------------------------

inline std::string encode_scores_csv(const std::vector<ScoredTrial>& trials) {
  std::string out = "clip_id,label,score\n";
  for (const auto& t : trials) {
    if (t.clip_id.find_first_of(",\n\r") != std::string::npos) {
      throw ValidationError("clip id '" + t.clip_id + "' cannot be written to CSV");
    }
    out += t.clip_id + "," + std::string(label_str(t.label)) + "," + format_double(t.score) + "\n";
  }
  return out;
}

inline std::vector<ScoredTrial> decode_scores_csv(const std::string& text, const std::string& origin = "<scores>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"clip_id", "label", "score"}) {
    throw FormatError(origin + ":1: expected header clip_id,label,score");
  }
  std::vector<ScoredTrial> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (cells.size() != 3) throw FormatError(where + "expected 3 fields");
    ScoredTrial t;
    t.clip_id = cells[0];
    try {
      t.label = parse_label(cells[1]);
      std::size_t used = 0;
      t.score = std::stod(cells[2], &used);
      if (used != cells[2].size()) throw FormatError("bad score");
    } catch (const std::exception& e) {
      throw FormatError(where + e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---- reports ---------------------------------------------------------------

inline nlohmann::json to_json(const PartitionReport& r) {
  return {{"partition", partition_str(r.partition)},
          {"eer_percent", r.eer_percent},
          {"threshold", r.threshold},
          {"n_bonafide", r.n_bonafide},
          {"n_deepfake", r.n_deepfake}};
}

struct RunReport {
  std::string feature;
  std::string head;
  std::string variant;
  std::vector<PartitionReport> partitions;
  std::optional<double> average_test_eer_percent;
};

inline RunReport make_run_report(std::string feature, std::string head, std::string variant,
                                 std::vector<PartitionReport> partitions) {
  RunReport r{std::move(feature), std::move(head), std::move(variant), std::move(partitions), std::nullopt};
  std::vector<PartitionReport> tests;
  for (const auto& p : r.partitions) {
    if (p.partition != Partition::Train && p.partition != Partition::Val) tests.push_back(p);
  }
  if (tests.size() == 4) r.average_test_eer_percent = average_test_eer(tests);
  return r;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json parts = nlohmann::json::array();
  for (const auto& p : r.partitions) parts.push_back(to_json(p));
  nlohmann::json j = {{"feature", r.feature}, {"head", r.head}, {"variant", r.variant}, {"partitions", parts}};
  j["average_test_eer_percent"] = r.average_test_eer_percent ? nlohmann::json(*r.average_test_eer_percent) : nullptr;
  return j;
}

inline RunReport run_report_from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.feature = j.at("feature").get<std::string>();
    r.head = j.at("head").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    for (const auto& p : j.at("partitions")) {
      PartitionReport pr;
      pr.partition = parse_partition(p.at("partition").get<std::string>());
      pr.eer_percent = p.at("eer_percent").get<double>();
      pr.threshold = p.at("threshold").get<double>();
      pr.n_bonafide = p.at("n_bonafide").get<std::size_t>();
      pr.n_deepfake = p.at("n_deepfake").get<std::size_t>();
      r.partitions.push_back(pr);
    }
    if (!j.at("average_test_eer_percent").is_null()) r.average_test_eer_percent = j["average_test_eer_percent"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run report: ") + e.what());
  }
  return r;
}

// Flat table, one row per (feature, head, variant, partition); the average
// appears as partition "AVG".
inline std::string results_table_csv(const std::vector<RunReport>& runs) {
  std::string out = "feature,head,variant,partition,eer_percent\n";
  for (const auto& r : runs) {
    const std::string key = r.feature + "," + r.head + "," + r.variant + ",";
    for (const auto& p : r.partitions) out += key + std::string(partition_str(p.partition)) + "," + format_double(p.eer_percent) + "\n";
    if (r.average_test_eer_percent) out += key + "AVG," + format_double(*r.average_test_eer_percent) + "\n";
  }
  return out;
}

inline std::string baseline_table_csv(const std::vector<BaselineDelta>& rows) {
  std::string out = "condition,ours_eer_percent,quoted_eer_percent,abs_diff\n";
  for (const auto& d : rows) {
    out += d.condition + "," + format_double(d.ours_percent) + "," + format_double(d.quoted_percent) + "," +
           format_double(d.abs_diff) + "\n";
  }
  return out;
}

}  // namespace svdd
