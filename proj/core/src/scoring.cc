#include "rabbi/scoring.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi {

std::string_view to_string(ScoringMode mode) {
  return mode == ScoringMode::kPointwise ? "pointwise" : "pairwise";
}

std::optional<double> ScoreTable::find(std::string_view candidate_id) const {
  const auto it = entries.find(candidate_id);
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

LabelProbs normalize_label_probs(const LabelProbs& raw, const LabelScale& scale) {
  double mass = 0.0;
  for (const auto& e : scale.entries()) {
    const auto it = raw.find(e.label);
    if (it == raw.end()) continue;
    if (!std::isfinite(it->second) || it->second < 0.0) {
      throw DomainError("probability of \"" + e.label + "\" must be finite and >= 0");
    }
    mass += it->second;
  }
  if (!(mass > 0.0)) throw DomainError("no probability mass on the scale labels");

  LabelProbs out;
  for (const auto& e : scale.entries()) {
    const auto it = raw.find(e.label);
    out[e.label] = it == raw.end() ? 0.0 : it->second / mass;
  }
  return out;
}

double pointwise_score(const PointwisePrediction& prediction, const LabelScale& scale) {
  if (const auto s = prediction.score()) return *s;
  const LabelProbs p = normalize_label_probs(*prediction.label_probs(), scale);
  double score = 0.0;
  for (const auto& e : scale.entries()) score += p.at(e.label) * e.relevance;
  // Rounding can push the convex combination a hair outside the range.
  return std::clamp(score, scale.min_relevance(), scale.max_relevance());
}

std::vector<ScoreTable> pointwise_score_tables(std::span<const PointwiseRecord> records,
                                               const std::optional<LabelScale>& scale) {
  std::map<std::string, ScoreTable> by_subtask;
  for (const auto& r : records) {
    auto& table = by_subtask[r.candidate.subtask];
    table.subtask = r.candidate.subtask;
    table.mode = ScoringMode::kPointwise;
    double score = 0.0;
    if (const auto s = r.prediction.score()) {
      score = *s;
    } else {
      if (!scale) throw InputError("label_probs require a label scale");
      score = pointwise_score(r.prediction, *scale);
    }
    table.entries[r.candidate.candidate_id] = score;
  }
  std::vector<ScoreTable> out;
  for (auto& [name, table] : by_subtask) out.push_back(std::move(table));
  return out;
}

ScoreTable pairwise_scores(std::span<const PairwiseResponse> responses) {
  if (responses.empty()) throw InputError("no pairwise responses to score");
  ScoreTable table;
  table.subtask = responses.front().subtask;
  table.pool_id = responses.front().pool_id;
  table.mode = ScoringMode::kPairwise;
  for (const auto& r : responses) {
    if (r.subtask != table.subtask || r.pool_id != table.pool_id) {
      throw InputError("pairwise_scores expects responses from a single pool");
    }
    double& first = table.entries[r.first];
    double& second = table.entries[r.second];
    switch (r.verdict) {
      case Verdict::kFirst: first += 0.5; break;
      case Verdict::kSecond: second += 0.5; break;
      case Verdict::kTie:
      case Verdict::kInvalid:
        first += 0.25;
        second += 0.25;
        break;
    }
  }
  return table;
}

std::vector<ScoreTable> pairwise_score_tables(std::span<const PairwiseResponse> responses) {
  std::map<std::pair<std::string, std::string>, std::vector<PairwiseResponse>> by_pool;
  for (const auto& r : responses) by_pool[{r.subtask, r.pool_id}].push_back(r);
  std::vector<ScoreTable> out;
  out.reserve(by_pool.size());
  for (const auto& [key, rs] : by_pool) out.push_back(pairwise_scores(rs));
  return out;
}

std::vector<PairPrompts> group_pairs(std::span<const PairwiseResponse> responses) {
  std::map<std::tuple<std::string, std::string, std::string, std::string>, PairPrompts> pairs;
  for (const auto& r : responses) {
    const bool first_is_lo = r.first < r.second;
    const std::string& lo = first_is_lo ? r.first : r.second;
    const std::string& hi = first_is_lo ? r.second : r.first;
    auto& p = pairs[{r.subtask, r.pool_id, lo, hi}];
    if (p.outcomes.empty()) {
      p.subtask = r.subtask;
      p.pool_id = r.pool_id;
      p.lo = lo;
      p.hi = hi;
    }
    (first_is_lo ? p.lo_first_seen : p.hi_first_seen) = true;
    PromptOutcome o = PromptOutcome::kInvalid;
    switch (r.verdict) {
      case Verdict::kFirst: o = first_is_lo ? PromptOutcome::kLoWins : PromptOutcome::kHiWins; break;
      case Verdict::kSecond: o = first_is_lo ? PromptOutcome::kHiWins : PromptOutcome::kLoWins; break;
      case Verdict::kTie: o = PromptOutcome::kTie; break;
      case Verdict::kInvalid: o = PromptOutcome::kInvalid; break;
    }
    p.outcomes.push_back(o);
  }
  std::vector<PairPrompts> out;
  out.reserve(pairs.size());
  for (auto& [key, p] : pairs) out.push_back(std::move(p));
  return out;
}

std::optional<std::string> consistent_winner(const PairPrompts& pair) {
  if (!pair.lo_first_seen || !pair.hi_first_seen) return std::nullopt;
  const auto all = [&](PromptOutcome o) {
    return std::all_of(pair.outcomes.begin(), pair.outcomes.end(), [o](PromptOutcome x) { return x == o; });
  };
  if (all(PromptOutcome::kLoWins)) return pair.lo;
  if (all(PromptOutcome::kHiWins)) return pair.hi;
  return std::nullopt;
}

PairClass classify_pair(const PairPrompts& pair) {
  const auto has = [&](PromptOutcome o) {
    return std::find(pair.outcomes.begin(), pair.outcomes.end(), o) != pair.outcomes.end();
  };
  if (has(PromptOutcome::kInvalid)) return PairClass::kInvalid;
  if (has(PromptOutcome::kTie)) return PairClass::kTie;
  if (has(PromptOutcome::kLoWins) && has(PromptOutcome::kHiWins)) return PairClass::kFlipped;
  return PairClass::kRegular;
}

PairwiseConsistencyStats pairwise_consistency_stats(std::span<const PairwiseResponse> responses) {
  PairwiseConsistencyStats s;
  int counts[4] = {0, 0, 0, 0};
  for (const auto& p : group_pairs(responses)) {
    ++counts[static_cast<int>(classify_pair(p))];
    ++s.pairs;
  }
  if (s.pairs == 0) return s;
  const double n = s.pairs;
  s.regular_pct = 100.0 * counts[static_cast<int>(PairClass::kRegular)] / n;
  s.flipped_pct = 100.0 * counts[static_cast<int>(PairClass::kFlipped)] / n;
  s.tie_pct = 100.0 * counts[static_cast<int>(PairClass::kTie)] / n;
  s.invalid_pct = 100.0 * counts[static_cast<int>(PairClass::kInvalid)] / n;
  return s;
}

CsvTable score_tables_csv(std::span<const ScoreTable> tables, const CandidateIndex& candidates) {
  CsvTable csv{{"subtask", "pool_id", "candidate_id", "group", "score", "mode"}, {}};
  for (const auto& t : tables) {
    for (const auto& [id, score] : t.entries) {
      const auto* c = candidates.find(t.subtask, id);
      csv.rows.push_back({t.subtask, t.pool_id, id, c ? c->group : std::string(), format_double(score),
                          std::string(to_string(t.mode))});
    }
  }
  return csv;
}

}  // namespace rabbi
