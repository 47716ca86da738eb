#include "rabbi/bias_metrics.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "rabbi/error.h"

namespace rabbi {

namespace {

void check_sample(const GroupScoreSample& s) {
  if (s.scores.empty()) throw DomainError("empty score sample for group \"" + s.group + "\"");
  for (const double v : s.scores) {
    if (!std::isfinite(v)) throw DomainError("non-finite score in group \"" + s.group + "\"");
  }
}

BiasScore make_score(Metric m, const GroupScoreSample& a, const GroupScoreSample& b, double value) {
  return BiasScore{m, a.group, b.group, value, is_directional(m), std::nullopt};
}

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kRabbi: return "RABBI";
    case Metric::kDeltaPoint: return "DELTA_POINT";
    case Metric::kDeltaPair: return "DELTA_PAIR";
    case Metric::kJsd: return "JSD";
    case Metric::kEmd: return "EMD";
  }
  return "RABBI";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (const Metric m : {Metric::kRabbi, Metric::kDeltaPoint, Metric::kDeltaPair, Metric::kJsd, Metric::kEmd}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

bool is_directional(Metric metric) { return metric != Metric::kJsd && metric != Metric::kEmd; }

BiasScore rabbi(const GroupScoreSample& protected_sample, const GroupScoreSample& reference_sample) {
  check_sample(protected_sample);
  check_sample(reference_sample);
  std::vector<double> ref = reference_sample.scores;
  std::sort(ref.begin(), ref.end());
  std::int64_t greater = 0;
  std::int64_t less = 0;
  for (const double a : protected_sample.scores) {
    const auto lo = std::lower_bound(ref.begin(), ref.end(), a);
    const auto hi = std::upper_bound(lo, ref.end(), a);
    greater += lo - ref.begin();
    less += ref.end() - hi;
  }
  const double pairs =
      static_cast<double>(protected_sample.scores.size()) * static_cast<double>(reference_sample.scores.size());
  return make_score(Metric::kRabbi, protected_sample, reference_sample,
                    static_cast<double>(greater - less) / pairs);
}

MannWhitneyU mann_whitney_u(const GroupScoreSample& a, const GroupScoreSample& b) {
  check_sample(a);
  check_sample(b);
  struct Obs {
    double value;
    bool from_a;
  };
  std::vector<Obs> all;
  all.reserve(a.scores.size() + b.scores.size());
  for (const double v : a.scores) all.push_back({v, true});
  for (const double v : b.scores) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.value < y.value; });

  double rank_sum_a = 0.0;
  std::int64_t tie_pairs = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::int64_t in_a = 0;
    while (j < all.size() && all[j].value == all[i].value) {
      in_a += all[j].from_a ? 1 : 0;
      ++j;
    }
    // Ranks i+1..j share their average.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum_a += midrank * static_cast<double>(in_a);
    tie_pairs += in_a * (static_cast<std::int64_t>(j - i) - in_a);
    i = j;
  }

  const double na = static_cast<double>(a.scores.size());
  const double nb = static_cast<double>(b.scores.size());
  const double u_mid = rank_sum_a - na * (na + 1.0) / 2.0;
  MannWhitneyU u;
  u.tie_pairs = tie_pairs;
  u.u_a = u_mid - 0.5 * static_cast<double>(tie_pairs);
  u.u_b = na * nb - u.u_a - static_cast<double>(tie_pairs);
  return u;
}

double rabbi_p_value(const GroupScoreSample& a, const GroupScoreSample& b, PValueOptions options) {
  const MannWhitneyU u = mann_whitney_u(a, b);
  const double na = static_cast<double>(a.scores.size());
  const double nb = static_cast<double>(b.scores.size());
  const double n = na + nb;
  const double mu = na * nb / 2.0;

  double stat = u.u_a;
  double variance = na * nb * (n + 1.0) / 12.0;
  if (options.tie_correction) {
    stat += 0.5 * static_cast<double>(u.tie_pairs);
    std::vector<double> all = a.scores;
    all.insert(all.end(), b.scores.begin(), b.scores.end());
    std::sort(all.begin(), all.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
      std::size_t j = i;
      while (j < all.size() && all[j] == all[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    if (n > 1.0) variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  }
  if (!(variance > 0.0)) return 1.0;

  double diff = std::abs(stat - mu);
  if (options.continuity_correction) diff = std::max(0.0, diff - 0.5);
  const double z = diff / std::sqrt(variance);
  const double p = std::erfc(z / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

BiasScore delta_pointwise(const GroupScoreSample& protected_sample, const GroupScoreSample& reference_sample) {
  check_sample(protected_sample);
  check_sample(reference_sample);
  return make_score(Metric::kDeltaPoint, protected_sample, reference_sample,
                    mean(protected_sample.scores) - mean(reference_sample.scores));
}

BiasScore delta_pairwise(std::span<const PairwiseResponse> responses, const CandidateIndex& candidates,
                         const GroupId& protected_group, const GroupId& reference) {
  if (protected_group == reference) throw DomainError("delta_pairwise needs two distinct groups");
  std::int64_t cross = 0;
  std::int64_t wins = 0;
  for (const auto& pair : group_pairs(responses)) {
    const auto* lo = candidates.find(pair.subtask, pair.lo);
    const auto* hi = candidates.find(pair.subtask, pair.hi);
    if (lo == nullptr || hi == nullptr) continue;
    const CandidateRecord* prot = nullptr;
    if (lo->group == protected_group && hi->group == reference) prot = lo;
    else if (hi->group == protected_group && lo->group == reference) prot = hi;
    if (prot == nullptr) continue;
    ++cross;
    if (const auto w = consistent_winner(pair); w && *w == prot->candidate_id) ++wins;
  }
  if (cross == 0) {
    throw DomainError("no compared pairs between \"" + protected_group + "\" and \"" + reference + "\"");
  }
  return BiasScore{Metric::kDeltaPair, protected_group, reference,
                   static_cast<double>(wins) / static_cast<double>(cross), true, std::nullopt};
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw DomainError("distributions must share a non-empty support");
  const auto kl_to_mid = [](double x, double m) { return x > 0.0 ? x * std::log2(x / m) : 0.0; };
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * kl_to_mid(p[i], m) + 0.5 * kl_to_mid(q[i], m);
  }
  return std::clamp(js, 0.0, 1.0);
}

BiasScore jsd(const GroupScoreSample& a, const GroupScoreSample& b, BinningRule binning) {
  check_sample(a);
  check_sample(b);
  if (binning.bins < 1 || binning.max_distinct < 1) throw DomainError("invalid JSD binning rule");

  std::vector<double> support(a.scores);
  support.insert(support.end(), b.scores.begin(), b.scores.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  std::function<std::size_t(double)> bin_of;
  std::size_t bins = 0;
  if (support.size() <= static_cast<std::size_t>(binning.max_distinct)) {
    bins = support.size();
    bin_of = [&support](double x) {
      return static_cast<std::size_t>(std::lower_bound(support.begin(), support.end(), x) - support.begin());
    };
  } else {
    bins = static_cast<std::size_t>(binning.bins);
    const double lo = support.front();
    const double width = (support.back() - lo) / static_cast<double>(bins);
    bin_of = [lo, width, bins](double x) {
      const auto i = static_cast<std::size_t>(std::floor((x - lo) / width));
      return std::min(i, bins - 1);
    };
  }

  const auto histogram = [&](const std::vector<double>& xs) {
    std::vector<double> h(bins, 0.0);
    for (const double x : xs) h[bin_of(x)] += 1.0;
    for (double& v : h) v /= static_cast<double>(xs.size());
    return h;
  };
  return make_score(Metric::kJsd, a, b, jensen_shannon(histogram(a.scores), histogram(b.scores)));
}

BiasScore emd(const GroupScoreSample& a, const GroupScoreSample& b) {
  check_sample(a);
  check_sample(b);
  std::vector<double> xa = a.scores;
  std::vector<double> xb = b.scores;
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());
  std::vector<double> grid(xa);
  grid.insert(grid.end(), xb.begin(), xb.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  double distance = 0.0;
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    while (ia < xa.size() && xa[ia] <= grid[g]) ++ia;
    while (ib < xb.size() && xb[ib] <= grid[g]) ++ib;
    const double cdf_gap = std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb);
    distance += cdf_gap * (grid[g + 1] - grid[g]);
  }
  return make_score(Metric::kEmd, a, b, distance);
}

Moments dist_moments(std::span<const double> sample) {
  if (sample.size() < 3) throw DomainError("moments need at least 3 values");
  const double n = static_cast<double>(sample.size());
  const double mu = mean(sample);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double x : sample) {
    const double d = x - mu;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw DomainError("moments undefined for a zero-variance sample");
  return Moments{m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

std::map<GroupId, GroupScoreSample> samples_by_group(std::span<const ScoreTable> tables,
                                                     const CandidateIndex& candidates, std::string_view subtask,
                                                     bool qualified_only) {
  std::map<GroupId, GroupScoreSample> out;
  for (const auto& t : tables) {
    if (t.subtask != subtask) continue;
    for (const auto& [id, score] : t.entries) {
      const CandidateRecord& c = candidates.at(t.subtask, id);
      if (qualified_only && !c.qualified) continue;
      auto& s = out[c.group];
      s.group = c.group;
      s.scores.push_back(score);
    }
  }
  return out;
}

}  // namespace rabbi
