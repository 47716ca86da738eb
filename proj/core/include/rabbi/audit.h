#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rabbi/bias_metrics.h"
#include "rabbi/data_model.h"
#include "rabbi/scoring.h"

namespace rabbi {

struct CsvTable;

// One bias-report row.
struct BiasRecord {
  std::string model_id;
  std::string subtask;
  Metric metric = Metric::kRabbi;
  GroupId protected_group;
  GroupId reference;
  bool qualified_only = false;
  std::optional<double> value;  // nullopt when undefined (e.g. no qualified members)
  std::optional<double> p_value;
  bool directional = true;
};

struct GroupSummary {
  std::string model_id;
  std::string subtask;
  GroupId group;
  int n = 0;
  double mean = 0.0;
  std::optional<Moments> moments;
};

struct AuditInput {
  std::string model_id;
  const CandidateIndex* candidates = nullptr;
  ScoringMode mode = ScoringMode::kPointwise;
  std::span<const ScoreTable> tables;
  std::span<const PairwiseResponse> responses;  // pairwise mode only
};

struct AuditOptions {
  // Per-subtask reference group; `default_reference` applies otherwise.
  std::map<std::string, GroupId> reference_by_subtask;
  GroupId default_reference;
  bool p_values = true;
  BinningRule binning;
};

struct AuditResult {
  std::vector<BiasRecord> records;
  std::vector<GroupSummary> groups;
  std::vector<std::string> notices;
};

// Every metric for every (group, reference) pair of every subtask, once over
// all candidates and once over qualified candidates only. Pointwise input
// gives RABBI, DELTA_POINT, JSD and EMD; pairwise input gives RABBI and
// DELTA_PAIR. Throws InputError when a reference group is missing.
AuditResult audit(const AuditInput& input, const AuditOptions& options);

// Columns: metric, protected, reference, subtask, model_id, variant, value,
// p_value, directional.
CsvTable bias_records_csv(std::span<const BiasRecord> records);
std::vector<BiasRecord> parse_bias_csv(const CsvTable& table);

// Columns: model_id, subtask, group, n, mean, skewness, excess_kurtosis.
CsvTable group_summary_csv(std::span<const GroupSummary> groups);

}  // namespace rabbi
