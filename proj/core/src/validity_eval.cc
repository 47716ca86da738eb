#include "rabbi/validity_eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi {

QualifiedSubset qualified_subset(const GroupId& a, const GroupId& b, std::span<const CandidateRecord> candidates,
                                 std::string_view subtask) {
  QualifiedSubset out;
  for (const auto& c : candidates) {
    if (!c.qualified || (!subtask.empty() && c.subtask != subtask)) continue;
    if (c.group == a) out.a.push_back(c);
    if (c.group == b) out.b.push_back(c);
  }
  return out;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("pearson: series lengths differ");
  if (xs.size() < 3) throw DomainError("pearson: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DomainError("pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw DomainError("pearson_p_value: need at least 3 points");
  if (std::abs(r) >= 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = r * std::sqrt(dof / (1.0 - r * r));
  const boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double rms_aggregate(std::span<const double> values) {
  if (values.empty()) throw DomainError("rms_aggregate: empty input");
  double sum = 0.0;
  for (const double v : values) sum += v * v;
  return std::sqrt(sum / static_cast<double>(values.size()));
}

FairnessRanking rank_models(const std::map<std::string, double>& aggregates, std::string basis) {
  std::vector<std::pair<std::string, double>> items(aggregates.begin(), aggregates.end());
  std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
    return std::tie(x.second, x.first) < std::tie(y.second, y.first);
  });
  FairnessRanking out;
  out.basis = std::move(basis);
  for (auto& [model, value] : items) {
    out.models.push_back(model);
    out.values.push_back(value);
  }
  return out;
}

double ndcg_at(const FairnessRanking& tau, const FairnessRanking& sigma, int n) {
  const std::size_t m = sigma.models.size();
  if (std::set<std::string>(tau.models.begin(), tau.models.end()) !=
          std::set<std::string>(sigma.models.begin(), sigma.models.end()) ||
      tau.models.size() != m) {
    throw DomainError("ndcg_at: rankings cover different model sets");
  }
  if (n < 1 || static_cast<std::size_t>(n) > m) throw DomainError("ndcg_at: N outside [1, number of models]");

  std::map<std::string, double> relevance;
  for (std::size_t i = 0; i < m; ++i) relevance[sigma.models[i]] = static_cast<double>(m - i);
  const auto dcg = [&](const FairnessRanking& r) {
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) sum += relevance.at(r.models[i - 1]) / std::log2(i + 1.0);
    return sum;
  };
  return dcg(tau) / dcg(sigma);
}

std::vector<MetricGapPair> pair_metrics_with_gaps(std::span<const BiasRecord> bias, std::span<const GapRecord> gaps) {
  using Key = std::tuple<std::string, std::string, GroupId, GroupId, bool>;
  std::map<Key, std::vector<const BiasRecord*>> by_key;
  for (const auto& b : bias) {
    if (b.value) by_key[{b.model_id, b.subtask, b.protected_group, b.reference, b.qualified_only}].push_back(&b);
  }
  std::vector<MetricGapPair> out;
  for (const auto& g : gaps) {
    if (!g.value) continue;
    const auto it = by_key.find({g.model_id, g.subtask, g.group_a, g.group_b, g.kind == GapKind::kEo});
    if (it == by_key.end()) continue;
    for (const BiasRecord* b : it->second) {
      out.push_back(MetricGapPair{g.model_id, g.subtask, g.group_a, g.group_b, b->metric, g.kind, g.k, *b->value,
                                  b->directional ? *g.value : std::abs(*g.value)});
    }
  }
  return out;
}

namespace {

std::string kind_label(Metric m, GapKind kind) {
  return std::string(to_string(m)) + " vs " + std::string(to_string(kind));
}

void add_correlation(ValidityReport& report, std::span<const MetricGapPair* const> points, CorrelationRow row) {
  std::vector<double> xs, ys;
  for (const auto* p : points) {
    xs.push_back(p->metric_value);
    ys.push_back(p->gap_value);
  }
  std::string where = row.slice;
  if (row.slice == "group") where += " " + row.group;
  if (row.slice == "k") where += "=" + std::to_string(row.k);
  try {
    row.r = pearson(xs, ys);
    row.n = xs.size();
    row.p_value = pearson_p_value(row.r, row.n);
    report.correlations.push_back(std::move(row));
  } catch (const DomainError& e) {
    report.warnings.push_back(kind_label(row.metric, row.gap_kind) + " (" + where + "): slice omitted, " + e.what());
  }
}

}  // namespace

ValidityReport correlation_report(std::span<const BiasRecord> bias, std::span<const GapRecord> gaps,
                                  const PairingRules& rules) {
  ValidityReport report;
  report.pairs = pair_metrics_with_gaps(bias, gaps);
  if (report.pairs.empty()) {
    report.warnings.push_back("no metric values could be paired with allocation gaps");
    return report;
  }
  int k = 0;
  if (rules.k) {
    k = *rules.k;
  } else {
    k = std::min_element(report.pairs.begin(), report.pairs.end(), [](const auto& x, const auto& y) {
          return x.k < y.k;
        })->k;
  }

  using SliceKey = std::pair<Metric, GapKind>;
  std::map<SliceKey, std::vector<const MetricGapPair*>> overall;
  std::map<std::tuple<Metric, GapKind, GroupId>, std::vector<const MetricGapPair*>> per_group;
  std::map<std::tuple<Metric, GapKind, int>, std::vector<const MetricGapPair*>> per_k;
  for (const auto& p : report.pairs) {
    per_k[{p.metric, p.gap_kind, p.k}].push_back(&p);
    if (p.k != k) continue;
    overall[{p.metric, p.gap_kind}].push_back(&p);
    per_group[{p.metric, p.gap_kind, p.protected_group}].push_back(&p);
  }

  for (const auto& [key, pts] : overall) {
    add_correlation(report, pts, CorrelationRow{key.first, key.second, "overall", {}, k, 0, 0.0, 1.0});
  }
  if (rules.per_group) {
    for (const auto& [key, pts] : per_group) {
      const auto& [m, kind, g] = key;
      add_correlation(report, pts, CorrelationRow{m, kind, "group", g, k, 0, 0.0, 1.0});
    }
  }
  if (rules.per_k) {
    for (const auto& [key, pts] : per_k) {
      const auto& [m, kind, kk] = key;
      add_correlation(report, pts, CorrelationRow{m, kind, "k", {}, kk, 0, 0.0, 1.0});
    }
  }

  // Fairness rankings per subtask: models ordered by the RMS of their metric
  // values against the order by RMS of their gaps.
  std::map<std::tuple<Metric, GapKind, std::string>, std::map<std::string, std::vector<const MetricGapPair*>>> cells;
  for (const auto& p : report.pairs) {
    if (p.k == k) cells[{p.metric, p.gap_kind, p.subtask}][p.model_id].push_back(&p);
  }
  std::map<std::tuple<Metric, GapKind, int>, std::vector<double>> ndcg_by_n;
  std::set<std::pair<GapKind, std::string>> ideal_emitted;
  for (const auto& [key, models] : cells) {
    const auto& [m, kind, subtask] = key;
    std::map<std::string, double> metric_agg, gap_agg;
    for (const auto& [model, pts] : models) {
      std::vector<double> mv, gv;
      for (const auto* p : pts) {
        mv.push_back(p->metric_value);
        gv.push_back(p->gap_value);
      }
      metric_agg[model] = rms_aggregate(mv);
      gap_agg[model] = rms_aggregate(gv);
    }
    const FairnessRanking sigma = rank_models(gap_agg, std::string(to_string(kind)));
    const FairnessRanking tau = rank_models(metric_agg, kind_label(m, kind));
    for (const auto* r : {&sigma, &tau}) {
      if (r == &sigma && !ideal_emitted.insert({kind, subtask}).second) continue;
      for (std::size_t i = 0; i < r->models.size(); ++i) {
        report.rankings.push_back(RankingRow{r->basis, subtask, static_cast<int>(i + 1), r->models[i], r->values[i]});
      }
    }
    for (int n = 1; n <= static_cast<int>(sigma.models.size()); ++n) {
      const double v = ndcg_at(tau, sigma, n);
      report.ndcg.push_back(NdcgRow{m, kind, subtask, n, v});
      ndcg_by_n[{m, kind, n}].push_back(v);
    }
  }
  for (const auto& [key, values] : ndcg_by_n) {
    const auto& [m, kind, n] = key;
    report.ndcg.push_back(NdcgRow{m, kind, "ALL", n,
                                  std::accumulate(values.begin(), values.end(), 0.0) /
                                      static_cast<double>(values.size())});
  }
  return report;
}

CsvTable correlations_csv(std::span<const CorrelationRow> rows, std::string_view slice) {
  CsvTable csv;
  if (slice == "group") csv.header = {"metric", "gap", "group", "k", "n", "r", "p_value"};
  else csv.header = {"metric", "gap", "k", "n", "r", "p_value"};
  for (const auto& r : rows) {
    if (r.slice != slice) continue;
    std::vector<std::string> row{std::string(to_string(r.metric)), std::string(to_string(r.gap_kind))};
    if (slice == "group") row.push_back(r.group);
    row.push_back(std::to_string(r.k));
    row.push_back(std::to_string(r.n));
    row.push_back(format_double(r.r));
    row.push_back(format_double(r.p_value));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

CsvTable rankings_csv(std::span<const RankingRow> rows) {
  CsvTable csv{{"basis", "subtask", "position", "model_id", "value"}, {}};
  for (const auto& r : rows) {
    csv.rows.push_back({r.basis, r.subtask, std::to_string(r.position), r.model_id, format_double(r.value)});
  }
  return csv;
}

CsvTable ndcg_csv(std::span<const NdcgRow> rows) {
  CsvTable csv{{"metric", "gap", "subtask", "n", "ndcg"}, {}};
  for (const auto& r : rows) {
    csv.rows.push_back({std::string(to_string(r.metric)), std::string(to_string(r.gap_kind)), r.subtask,
                        std::to_string(r.n), format_double(r.ndcg)});
  }
  return csv;
}

CsvTable plot_data_csv(std::span<const MetricGapPair> pairs) {
  CsvTable csv{{"model_id", "subtask", "protected", "reference", "metric", "gap", "k", "metric_value", "gap_value"},
               {}};
  for (const auto& p : pairs) {
    csv.rows.push_back({p.model_id, p.subtask, p.protected_group, p.reference, std::string(to_string(p.metric)),
                        std::string(to_string(p.gap_kind)), std::to_string(p.k), format_double(p.metric_value),
                        format_double(p.gap_value)});
  }
  return csv;
}

std::string validity_report_json(const ValidityReport& report) {
  nlohmann::ordered_json j;
  j["correlations"] = nlohmann::ordered_json::array();
  for (const auto& r : report.correlations) {
    nlohmann::ordered_json row{{"metric", to_string(r.metric)}, {"gap", to_string(r.gap_kind)},
                               {"slice", r.slice}};
    if (r.slice == "group") row["group"] = r.group;
    row["k"] = r.k;
    row["n"] = r.n;
    row["r"] = r.r;
    row["p_value"] = r.p_value;
    j["correlations"].push_back(std::move(row));
  }
  j["rankings"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rankings) {
    j["rankings"].push_back(
        {{"basis", r.basis}, {"subtask", r.subtask}, {"position", r.position}, {"model_id", r.model_id},
         {"value", r.value}});
  }
  j["ndcg"] = nlohmann::ordered_json::array();
  for (const auto& r : report.ndcg) {
    j["ndcg"].push_back({{"metric", to_string(r.metric)}, {"gap", to_string(r.gap_kind)}, {"subtask", r.subtask},
                         {"n", r.n}, {"ndcg", r.ndcg}});
  }
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

}  // namespace rabbi
