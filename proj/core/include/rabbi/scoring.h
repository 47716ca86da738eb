#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rabbi/data_model.h"

namespace rabbi {

struct CsvTable;

enum class ScoringMode { kPointwise, kPairwise };

std::string_view to_string(ScoringMode mode);

// Candidate scores for one subtask (pointwise) or one pool (pairwise; the
// scores are only comparable within that pool).
struct ScoreTable {
  std::string subtask;
  ScoringMode mode = ScoringMode::kPointwise;
  std::string pool_id;  // empty for pointwise tables
  std::map<std::string, double, std::less<>> entries;

  std::optional<double> find(std::string_view candidate_id) const;
};

// Renormalizes raw label probabilities over the scale labels. Labels absent
// from `raw` count as zero. Throws DomainError if the scale labels carry no
// probability mass.
LabelProbs normalize_label_probs(const LabelProbs& raw, const LabelScale& scale);

// Expected relevance under the normalized label distribution; precomputed
// scores are returned unchanged.
double pointwise_score(const PointwisePrediction& prediction, const LabelScale& scale);

// One table per subtask, sorted by subtask. `scale` may be nullopt when every
// record carries a precomputed score.
std::vector<ScoreTable> pointwise_score_tables(std::span<const PointwiseRecord> records,
                                               const std::optional<LabelScale>& scale);

// Tournament scores for one pool. Each ordered prompt hands out 0.5 to the
// named winner, or 0.25 to each side on a tie or an invalid answer, so a
// consistent win is worth 1, a flipped pair 0.5 each, and a complete pool
// sums to n(n-1)/2. Throws InputError on empty input or mixed pools.
ScoreTable pairwise_scores(std::span<const PairwiseResponse> responses);

// Groups responses by (subtask, pool_id) and scores each pool.
std::vector<ScoreTable> pairwise_score_tables(std::span<const PairwiseResponse> responses);

// Outcome of one prompt in terms of the unordered pair (lo < hi by id).
enum class PromptOutcome { kLoWins, kHiWins, kTie, kInvalid };

struct PairPrompts {
  std::string subtask;
  std::string pool_id;
  std::string lo;
  std::string hi;
  std::vector<PromptOutcome> outcomes;
  bool lo_first_seen = false;  // prompt with lo shown first exists
  bool hi_first_seen = false;  // prompt with hi shown first exists
};

std::vector<PairPrompts> group_pairs(std::span<const PairwiseResponse> responses);

// Candidate preferred in both presentation orders, if any.
std::optional<std::string> consistent_winner(const PairPrompts& pair);

enum class PairClass { kRegular, kFlipped, kTie, kInvalid };

// Invalid takes precedence over Tie; a pair with only one decisive prompt
// is Regular.
PairClass classify_pair(const PairPrompts& pair);

struct PairwiseConsistencyStats {
  double regular_pct = 0.0;
  double flipped_pct = 0.0;
  double tie_pct = 0.0;
  double invalid_pct = 0.0;
  int pairs = 0;
};

PairwiseConsistencyStats pairwise_consistency_stats(std::span<const PairwiseResponse> responses);

// Columns: subtask, pool_id, candidate_id, group, score, mode.
CsvTable score_tables_csv(std::span<const ScoreTable> tables, const CandidateIndex& candidates);

}  // namespace rabbi
