#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rabbi/data_model.h"
#include "rabbi/scoring.h"

namespace rabbi {

struct CsvTable;

enum class PoolMode { kOnePerGroup, kSampleM };

std::string_view to_string(PoolMode mode);
std::optional<PoolMode> parse_pool_mode(std::string_view name);

struct RoundPlan {
  PoolMode mode = PoolMode::kOnePerGroup;
  int rounds = 1000;
  int m = 10;  // pool size for kSampleM
  int k = 1;
  std::uint64_t seed = 0;
};

// Pools for every subtask present in `candidates`, `plan.rounds` per subtask.
// Pool ids are "<subtask>#r<round>". Throws InputError on an empty group,
// m larger than the subtask population, or k >= pool size.
std::vector<PoolSpec> build_rounds(std::span<const CandidateRecord> candidates, const RoundPlan& plan);

struct SelectionOutcome {
  std::string pool_id;
  std::string subtask;
  int k = 1;
  std::vector<std::string> ranking;  // best first
  std::vector<double> scores;        // parallel to ranking
  std::set<std::string> selected;
  std::uint64_t tie_break_seed = 0;
};

// Ranks the pool by score, descending. Equal scores are ordered by a uniform
// random permutation drawn from (seed, pool_id), so the order does not depend
// on k. Uses pool.k unless `k` is given; 1 <= k <= n. Throws InputError when
// a member has no score.
SelectionOutcome select_top_k(const PoolSpec& pool, const ScoreTable& scores, std::uint64_t seed,
                              std::optional<int> k = std::nullopt);

// Resolves the score table for a pool: the pool's own pairwise table if
// there is one, else the pointwise table of its subtask.
class ScoreSource {
 public:
  ScoreSource() = default;
  explicit ScoreSource(std::vector<ScoreTable> tables);

  const ScoreTable& table_for(const PoolSpec& pool) const;
  const std::vector<ScoreTable>& tables() const { return tables_; }

 private:
  std::vector<ScoreTable> tables_;
  std::map<std::string, std::size_t, std::less<>> pointwise_;
  std::map<std::pair<std::string, std::string>, std::size_t> pairwise_;
};

// select_top_k over all pools on up to `jobs` threads. Output order follows
// `pools` regardless of scheduling.
std::vector<SelectionOutcome> run_selection(std::span<const PoolSpec> pools, const ScoreSource& scores,
                                            std::uint64_t seed, std::optional<int> k = std::nullopt,
                                            int jobs = 1);

struct GroupSelectionStats {
  GroupId group;
  std::int64_t total = 0;
  std::int64_t selected = 0;
  std::int64_t qualified_total = 0;
  std::int64_t qualified_selected = 0;
};

// Counts appearances: a candidate drawn into several rounds counts each time.
std::map<GroupId, GroupSelectionStats> group_stats(std::span<const SelectionOutcome> outcomes,
                                                   const CandidateIndex& candidates);

// Selection-rate gap phi(A) - phi(B). Throws DomainError if a group never
// appeared.
double dp_gap(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& a, const GroupId& b);
// Same over qualified appearances only. Throws DomainError if a group has
// no qualified appearance.
double eo_gap(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& a, const GroupId& b);

enum class GapKind { kDp, kEo };

std::string_view to_string(GapKind kind);
std::optional<GapKind> parse_gap_kind(std::string_view name);

struct GapRecord {
  std::string subtask;
  std::string model_id;
  GapKind kind = GapKind::kDp;
  GroupId group_a;
  GroupId group_b;
  int k = 1;
  std::optional<double> value;  // nullopt when undefined
  int rounds = 0;
};

// DP and EO gaps of every group against `reference`.
std::vector<GapRecord> gap_records(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& reference,
                                   std::string_view subtask, std::string_view model_id, int k, int rounds);

// Columns: pool_id, rank, candidate_id, group, score, selected.
CsvTable outcomes_csv(std::span<const SelectionOutcome> outcomes, const CandidateIndex& candidates);
// Columns: subtask, model_id, metric, group_a, group_b, k, value, rounds.
CsvTable gaps_csv(std::span<const GapRecord> gaps);
std::vector<GapRecord> parse_gaps_csv(const CsvTable& table);

}  // namespace rabbi
