#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rabbi/allocation_sim.h"
#include "rabbi/audit.h"
#include "rabbi/bias_metrics.h"
#include "rabbi/data_model.h"

namespace rabbi {

struct CsvTable;

struct QualifiedSubset {
  std::vector<CandidateRecord> a;
  std::vector<CandidateRecord> b;

  bool empty() const { return a.empty() || b.empty(); }
};

// Qualified members of groups a and b (within `subtask` unless empty).
QualifiedSubset qualified_subset(const GroupId& a, const GroupId& b, std::span<const CandidateRecord> candidates,
                                 std::string_view subtask = {});

// Throws DomainError on length mismatch, fewer than 3 points or a constant
// series.
double pearson(std::span<const double> xs, std::span<const double> ys);
// Two-sided p-value of r under the t approximation with n - 2 dof.
double pearson_p_value(double r, std::size_t n);

// Throws DomainError on empty input.
double rms_aggregate(std::span<const double> values);

struct FairnessRanking {
  std::string basis;
  std::vector<std::string> models;  // least biased first
  std::vector<double> values;       // parallel to models, non-decreasing
};

// Ascending by value, ties by model id.
FairnessRanking rank_models(const std::map<std::string, double>& aggregates, std::string basis = {});

// DCG of tau's top n with the relevance of a model being its reverse rank in
// sigma (best ideal model gets |models|), normalized by sigma's own DCG.
// Throws DomainError on different model sets or n outside [1, |models|].
double ndcg_at(const FairnessRanking& tau, const FairnessRanking& sigma, int n);

struct MetricGapPair {
  std::string model_id;
  std::string subtask;
  GroupId protected_group;
  GroupId reference;
  Metric metric = Metric::kRabbi;
  GapKind gap_kind = GapKind::kDp;
  int k = 1;
  double metric_value = 0.0;
  double gap_value = 0.0;  // absolute gap for non-directional metrics
};

struct PairingRules {
  // Quota used for the overall and per-group slices; the smallest k present
  // in the gap data when unset.
  std::optional<int> k;
  bool per_group = true;
  bool per_k = true;
};

struct CorrelationRow {
  Metric metric = Metric::kRabbi;
  GapKind gap_kind = GapKind::kDp;
  std::string slice;  // "overall", "group" or "k"
  GroupId group;      // per-group slices
  int k = 0;
  std::size_t n = 0;
  double r = 0.0;
  double p_value = 1.0;
};

struct NdcgRow {
  Metric metric = Metric::kRabbi;
  GapKind gap_kind = GapKind::kDp;
  std::string subtask;  // "ALL" for the mean over subtasks
  int n = 1;
  double ndcg = 0.0;
};

struct RankingRow {
  std::string basis;
  std::string subtask;
  int position = 1;
  std::string model_id;
  double value = 0.0;
};

struct ValidityReport {
  std::vector<MetricGapPair> pairs;
  std::vector<CorrelationRow> correlations;
  std::vector<RankingRow> rankings;
  std::vector<NdcgRow> ndcg;
  std::vector<std::string> warnings;
};

// Pairs bias rows with gap rows on (model, subtask, protected, reference).
// DP gaps pair with metrics over all candidates, EO gaps with the
// qualified-only variant. Non-directional metrics pair with |gap|.
std::vector<MetricGapPair> pair_metrics_with_gaps(std::span<const BiasRecord> bias, std::span<const GapRecord> gaps);

// Pearson r per (metric, gap kind) plus per-group and per-k slices; RMS
// fairness rankings per subtask and NDCG@1..N against the gap ranking.
// Slices with fewer than 3 points or a constant series are dropped with a
// warning.
ValidityReport correlation_report(std::span<const BiasRecord> bias, std::span<const GapRecord> gaps,
                                  const PairingRules& rules = {});

CsvTable correlations_csv(std::span<const CorrelationRow> rows, std::string_view slice);
CsvTable rankings_csv(std::span<const RankingRow> rows);
CsvTable ndcg_csv(std::span<const NdcgRow> rows);
// Long-form metric/gap points.
CsvTable plot_data_csv(std::span<const MetricGapPair> pairs);
std::string validity_report_json(const ValidityReport& report);

}  // namespace rabbi
