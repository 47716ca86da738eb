#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rabbi/data_model.h"
#include "rabbi/scoring.h"

namespace rabbi {

struct GroupScoreSample {
  GroupId group;
  std::vector<double> scores;
};

enum class Metric { kRabbi, kDeltaPoint, kDeltaPair, kJsd, kEmd };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);
// JSD and EMD are distances and carry no sign.
bool is_directional(Metric metric);

struct BiasScore {
  Metric metric = Metric::kRabbi;
  GroupId protected_group;
  GroupId reference;
  double value = 0.0;
  bool directional = true;
  std::optional<double> p_value;
};

// Share of cross-group pairs where the protected candidate scores higher,
// minus the share where it scores lower. Equal scores count for neither.
// Throws DomainError on an empty or non-finite sample.
BiasScore rabbi(const GroupScoreSample& protected_sample, const GroupScoreSample& reference_sample);

struct MannWhitneyU {
  double u_a = 0.0;  // pairs with s_a > s_b
  double u_b = 0.0;  // pairs with s_a < s_b
  std::int64_t tie_pairs = 0;
};

// Computed from joint midranks (rank-sum route), independent of the pair
// counting used by rabbi().
MannWhitneyU mann_whitney_u(const GroupScoreSample& a, const GroupScoreSample& b);

struct PValueOptions {
  // On: U counts tied pairs as one half and the variance gets the usual tie
  // term. Off: U = u_a (strict wins only) with the plain n_a n_b (N+1)/12
  // variance.
  bool tie_correction = true;
  bool continuity_correction = false;
};

// Two-sided p-value from the normal approximation to the U distribution.
// Returns 1 when the variance vanishes (all scores identical).
double rabbi_p_value(const GroupScoreSample& a, const GroupScoreSample& b, PValueOptions options = {});

BiasScore delta_pointwise(const GroupScoreSample& protected_sample, const GroupScoreSample& reference_sample);

// Fraction of observed cross-group pairs (one per pool they share) in which
// the model prefers the protected candidate in both presentation orders.
// Throws DomainError when no cross-group pair was compared.
BiasScore delta_pairwise(std::span<const PairwiseResponse> responses, const CandidateIndex& candidates,
                         const GroupId& protected_group, const GroupId& reference);

struct BinningRule {
  // Exact discrete support while the joint sample has at most this many
  // distinct values; otherwise `bins` equal-width bins over the joint range.
  int max_distinct = 32;
  int bins = 20;
};

// Base-2 Jensen-Shannon divergence of two distributions on a shared support.
double jensen_shannon(std::span<const double> p, std::span<const double> q);

BiasScore jsd(const GroupScoreSample& a, const GroupScoreSample& b, BinningRule binning = {});

// 1-D Wasserstein-1 distance between the empirical distributions, i.e. the
// integral of |F_a - F_b|.
BiasScore emd(const GroupScoreSample& a, const GroupScoreSample& b);

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

// Population (biased) moment estimators. Needs n >= 3 and nonzero variance.
Moments dist_moments(std::span<const double> sample);

// Per-group score samples for one subtask. Pointwise tables give one score
// per candidate; pairwise tables give one score per pool appearance.
std::map<GroupId, GroupScoreSample> samples_by_group(std::span<const ScoreTable> tables,
                                                     const CandidateIndex& candidates, std::string_view subtask,
                                                     bool qualified_only = false);

}  // namespace rabbi
