// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "rabbi/allocation_sim.h"
#include "rabbi/audit.h"
#include "rabbi/bias_metrics.h"
#include "rabbi/error.h"
#include "rabbi/model_client.h"
#include "rabbi/random.h"
#include "rabbi/report.h"
#include "rabbi/scoring.h"
#include "rabbi/synthetic_bench.h"
#include "rabbi/validity_eval.h"
#include "test_support.h"

namespace {

using namespace rabbi;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail << "failed: " << what << "; ";
    }
  }
};

GroupScoreSample S(std::vector<double> v) { return {"g", std::move(v)}; }

std::vector<double> draw_ints(std::mt19937_64& rng, int n, int hi) {
  std::uniform_int_distribution<int> d(0, hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

double pair_counter(const std::vector<double>& a, const std::vector<double>& b) {
  long long w = 0, l = 0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) ++w;
      else if (x < y) ++l;
    }
  }
  return static_cast<double>(w - l) / static_cast<double>(a.size() * b.size());
}

void criterion_1(Outcome& o) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 12);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = draw_ints(rng, size(rng), 5), b = draw_ints(rng, size(rng), 5);
    const double r = rabbi::rabbi(S(a), S(b)).value;
    o.require(r == pair_counter(a, b), "rabbi differs from brute-force counter");
    const auto u = mann_whitney_u(S(a), S(b));
    worst = std::max(worst, std::abs(r - (u.u_a - u.u_b) / static_cast<double>(a.size() * b.size())));
  }
  o.require(worst <= 1e-12, "rank-biserial mismatch");
  o.detail << "max |rabbi - (U_A-U_B)/nAnB| = " << worst << "; ";
}

void criterion_2(Outcome& o) {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const auto mw = mann_whitney_u(S(a), S(b));
    o.require(mw.tie_pairs == 0, "sample unexpectedly tied");
    const double n = static_cast<double>(a.size() * b.size());
    worst = std::max(worst, std::abs(rabbi::rabbi(S(a), S(b)).value - (2.0 * mw.u_a / n - 1.0)));
  }
  o.require(worst <= 1e-12, "identity violated");
  o.detail << "max deviation " << worst << "; ";
}

void criterion_3(Outcome& o) {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(1, 15);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    const bool ties = i % 2 == 0;
    for (auto& x : a) x = ties ? std::round(2 * z(rng)) : z(rng);
    for (auto& x : b) x = ties ? std::round(2 * z(rng)) + 0.5 : z(rng) + 0.3;
    const double ab = rabbi::rabbi(S(a), S(b)).value, ba = rabbi::rabbi(S(b), S(a)).value;
    o.require(ab == -ba, "rabbi antisymmetry");
    o.require(ab >= -1.0 && ab <= 1.0, "rabbi range");
    const double j1 = jsd(S(a), S(b)).value, j2 = jsd(S(b), S(a)).value;
    o.require(j1 >= 0.0 && j1 <= 1.0 + 1e-12, "JSD range");
    o.require(std::abs(j1 - j2) <= 1e-12, "JSD symmetry");
    const double e1 = emd(S(a), S(b)).value, e2 = emd(S(b), S(a)).value;
    o.require(e1 >= 0.0, "EMD sign");
    o.require(std::abs(e1 - e2) <= 1e-12, "EMD symmetry");
  }

  std::uniform_int_distribution<std::int64_t> count(1, 50);
  for (int i = 0; i < 500; ++i) {
    const std::int64_t ta = count(rng), tb = count(rng);
    std::map<GroupId, GroupSelectionStats> s{{"A", {"A", ta, ta / 2, ta, ta / 3}}, {"B", {"B", tb, tb / 3, tb, tb / 2}}};
    o.require(dp_gap(s, "A", "B") == -dp_gap(s, "B", "A"), "DP antisymmetry");
    o.require(eo_gap(s, "A", "B") == -eo_gap(s, "B", "A"), "EO antisymmetry");
  }

  std::uniform_int_distribution<int> pool_size(2, 8), verdict(0, 3);
  int pools = 0;
  for (; pools < 10000; ++pools) {
    const int n = pool_size(rng);
    std::vector<PairwiseResponse> r;
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        if (x != y) r.push_back({"t", "p", std::to_string(x), std::to_string(y), static_cast<Verdict>(verdict(rng))});
      }
    }
    double total = 0.0;
    for (const auto& [id, s] : pairwise_scores(r).entries) total += s;
    o.require(std::abs(total - n * (n - 1) / 2.0) <= 1e-9, "pool score conservation");
  }
  o.detail << pools << " randomized pools conserved; ";
}

void criterion_4(Outcome& o) {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto f = [](double x) { return x * x * x + x; };
  bool delta_moved = false, emd_moved = false;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(20), b(25);
    for (auto& x : a) x = i % 3 == 0 ? std::round(z(rng)) : z(rng) + 0.2;
    for (auto& x : b) x = i % 3 == 0 ? std::round(z(rng)) : z(rng);
    std::vector<double> ta(a), tb(b);
    std::transform(ta.begin(), ta.end(), ta.begin(), f);
    std::transform(tb.begin(), tb.end(), tb.begin(), f);
    o.require(rabbi::rabbi(S(a), S(b)).value == rabbi::rabbi(S(ta), S(tb)).value, "rabbi changed under x^3+x");
    delta_moved |= std::abs(delta_pointwise(S(a), S(b)).value - delta_pointwise(S(ta), S(tb)).value) > 1e-9;
    emd_moved |= std::abs(emd(S(a), S(b)).value - emd(S(ta), S(tb)).value) > 1e-9;
  }
  o.require(delta_moved, "delta_pointwise never changed");
  o.require(emd_moved, "emd never changed");
}

void criterion_5(Outcome& o) {
  std::vector<CandidateRecord> c;
  for (int g = 0; g < 6; ++g) {
    for (int i = 0; i < 15; ++i) c.push_back({"c" + std::to_string(g) + "_" + std::to_string(i), "G" + std::to_string(g), i % 2 == 0, "t"});
  }
  const CandidateIndex index(c);
  ScoreTable table{"t", ScoringMode::kPointwise, "", {}};
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (const auto& r : c) table.entries[r.candidate_id] = coarse(rng);
  const ScoreSource source({table});

  for (const int k : {1, 2, 3}) {
    const auto pools = build_rounds(c, {PoolMode::kOnePerGroup, 400, 10, k, 7});
    const auto out = run_selection(pools, source, 8, std::nullopt, 4);
    for (const auto& r : out) o.require(static_cast<int>(r.selected.size()) == k, "round selected != k");
    for (const auto& [g, s] : group_stats(out, index)) o.require(s.total == 400, "one-per-group totals");
  }
  {
    const auto pools = build_rounds(c, {PoolMode::kSampleM, 300, 7, 2, 9});
    std::int64_t total = 0;
    for (const auto& [g, s] : group_stats(run_selection(pools, source, 3), index)) total += s.total;
    o.require(total == 300 * 7, "sample_m appearance total");
  }

  std::uniform_int_distribution<int> size(2, 6);
  for (int i = 0; i < 1000; ++i) {
    const int n = size(rng);
    PoolSpec pool{"p" + std::to_string(i), "t", {}, 1};
    ScoreTable t{"t", ScoringMode::kPointwise, "", {}};
    for (int m = 0; m < n; ++m) {
      pool.members.push_back("m" + std::to_string(m));
      t.entries[pool.members.back()] = coarse(rng);
    }
    const int k = std::uniform_int_distribution<int>(1, n)(rng);
    const auto got = select_top_k(pool, t, static_cast<std::uint64_t>(i), k);
    std::vector<double> sorted;
    for (const auto& [id, s] : t.entries) sorted.push_back(s);
    std::sort(sorted.rbegin(), sorted.rend());
    const double cut = sorted[static_cast<std::size_t>(k - 1)];
    int above = 0;
    for (const auto& [id, s] : t.entries) above += s > cut;
    int chosen_above = 0;
    bool ok = static_cast<int>(got.selected.size()) == k;
    for (const auto& id : got.selected) {
      const double s = t.entries.at(id);
      ok &= s >= cut;
      chosen_above += s > cut;
    }
    o.require(ok && chosen_above == above, "top-k differs from sort oracle");
  }

  const PoolSpec tie{"tie", "t", {"a", "b"}, 1};
  const ScoreTable tt{"t", ScoringMode::kPointwise, "", {{"a", 0.5}, {"b", 0.5}}};
  int a_wins = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) a_wins += select_top_k(tie, tt, s).selected.count("a");
  const double share = a_wins / 10000.0;
  o.require(std::abs(share - 0.5) <= 0.02, "tie-break share outside 50% +- 2%");
  o.detail << "tie share " << share << "; ";
}

void criterion_6(Outcome& o) {
  const auto c = gen_adversarial_case(2024);
  const auto data = gen_scores(c.spec);
  const auto candidates = data.candidates();
  const CandidateIndex index(candidates);
  const auto pools = build_rounds(candidates, {PoolMode::kOnePerGroup, 2000, 0, 1, 99});
  for (const auto& p : pools) o.require(p.size() == 8, "pool size is not 8");
  const auto out = run_selection(pools, ScoreSource({data.scores}), 100, 1, 4);
  const double dp = dp_gap(group_stats(out, index), c.spec.focus_group, c.spec.reference_group);
  const auto samples = samples_by_group(std::span(&data.scores, 1), index, c.spec.subtask);
  const double delta = delta_pointwise(samples.at(c.spec.focus_group), samples.at(c.spec.reference_group)).value;
  const double r = rabbi::rabbi(samples.at(c.spec.focus_group), samples.at(c.spec.reference_group)).value;
  o.require(std::abs(delta) < 0.05, "|delta| >= 0.05");
  o.require(std::abs(dp) >= 0.2, "|DP gap| < 0.2");
  o.require(std::abs(r) >= 0.2, "|rabbi| < 0.2");
  o.require(r * dp > 0.0, "rabbi and DP gap disagree in sign");
  o.detail << "delta=" << delta << " dp=" << dp << " rabbi=" << r << " attempts=" << c.attempts << "; ";
}

struct RegimeResult {
  double r_rabbi = 0, r_delta = 0, r_jsd = 0;
};

RegimeResult run_regime(Regime regime, std::uint64_t seed) {
  std::vector<BiasRecord> bias;
  std::vector<GapRecord> gaps;
  for (const auto& spec : gen_benchmark(regime, 10, seed)) {
    const auto data = gen_scores(spec);
    const auto candidates = data.candidates();
    const CandidateIndex index(candidates);
    const std::vector<ScoreTable> tables{data.scores};
    const auto a = audit({spec.model_id, &index, ScoringMode::kPointwise, tables, {}},
                         {.default_reference = spec.reference_group, .p_values = false});
    bias.insert(bias.end(), a.records.begin(), a.records.end());
    const auto pools = build_rounds(candidates, {PoolMode::kOnePerGroup, 1000, 0, 1, derive_seed(spec.seed, 1)});
    const auto out = run_selection(pools, ScoreSource(tables), derive_seed(spec.seed, 2), 1, 4);
    const auto g = gap_records(group_stats(out, index), spec.reference_group, spec.subtask, spec.model_id, 1, 1000);
    gaps.insert(gaps.end(), g.begin(), g.end());
  }
  const auto report = correlation_report(bias, gaps, {.k = 1, .per_group = false, .per_k = false});
  RegimeResult res;
  for (const auto& row : report.correlations) {
    if (row.slice != "overall" || row.gap_kind != GapKind::kDp) continue;
    if (row.metric == Metric::kRabbi) res.r_rabbi = row.r;
    if (row.metric == Metric::kDeltaPoint) res.r_delta = row.r;
    if (row.metric == Metric::kJsd) res.r_jsd = row.r;
  }
  return res;
}

void criterion_7(Outcome& o) {
  const auto resume = run_regime(Regime::kResume, 7);
  const auto essay = run_regime(Regime::kEssay, 7);
  o.require(resume.r_rabbi >= 0.9, "r(RABBI, DP) < 0.9 on the skewed regime");
  o.require(resume.r_rabbi > resume.r_delta, "r(RABBI) <= r(delta)");
  o.require(resume.r_rabbi > resume.r_jsd, "r(RABBI) <= r(JSD, |DP|)");
  o.detail << "skewed: r_rabbi=" << resume.r_rabbi << " r_delta=" << resume.r_delta << " r_jsd=" << resume.r_jsd
           << "; symmetric: r_rabbi=" << essay.r_rabbi << " r_delta=" << essay.r_delta << " r_jsd=" << essay.r_jsd
           << "; ";
}

FairnessRanking ranking_of(std::vector<std::string> models) {
  FairnessRanking r;
  r.models = std::move(models);
  r.values.assign(r.models.size(), 0.0);
  return r;
}

void criterion_8(Outcome& o) {
  std::mt19937_64 rng(808);
  for (int m = 1; m <= 12; ++m) {
    std::vector<std::string> ids;
    for (int i = 0; i < m; ++i) ids.push_back("M" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto sigma = ranking_of(ids);
    for (int n = 1; n <= m; ++n) o.require(std::abs(ndcg_at(sigma, sigma, n) - 1.0) <= 1e-12, "ideal NDCG != 1");
    for (int trial = 0; trial < 20; ++trial) {
      auto tau_ids = ids;
      std::shuffle(tau_ids.begin(), tau_ids.end(), rng);
      const int n = std::uniform_int_distribution<int>(1, m)(rng);
      auto permuted = tau_ids;
      std::shuffle(permuted.begin() + n, permuted.end(), rng);
      o.require(ndcg_at(ranking_of(tau_ids), sigma, n) == ndcg_at(ranking_of(permuted), sigma, n),
                "NDCG@N depends on order below N");
    }
  }
  const double v = ndcg_at(ranking_of({"M2", "M1", "M3"}), ranking_of({"M1", "M2", "M3"}), 3);
  o.require(std::abs(v - 0.9225) <= 1e-4, "3-model example");
  o.detail << "3-model NDCG=" << v << "; ";
}

void criterion_9(Outcome& o) {
  const auto near = [&](double got, double want, const std::string& what) {
    o.require(std::abs(got - want) <= 1e-4, what);
  };
  near(rabbi::rabbi(S({3, 1, 2}), S({2, 2, 4})).value, -1.0 / 3.0, "rabbi -1/3");
  const auto u = mann_whitney_u(S({3, 1, 2}), S({2, 2, 4}));
  near(u.u_a, 2, "U_A");
  near(u.u_b, 5, "U_B");
  const std::vector<PairwiseResponse> pool{
      {"t", "p", "a", "b", Verdict::kFirst}, {"t", "p", "b", "a", Verdict::kSecond},
      {"t", "p", "a", "c", Verdict::kFirst}, {"t", "p", "c", "a", Verdict::kFirst},
      {"t", "p", "b", "c", Verdict::kTie},   {"t", "p", "c", "b", Verdict::kFirst}};
  const auto scores = pairwise_scores(pool);
  near(*scores.find("a"), 1.5, "pool score a");
  near(*scores.find("b"), 0.25, "pool score b");
  near(*scores.find("c"), 1.25, "pool score c");
  const std::map<GroupId, GroupSelectionStats> dp{{"A", {"A", 4, 3, 0, 0}}, {"B", {"B", 4, 1, 0, 0}}};
  near(dp_gap(dp, "A", "B"), 0.5, "DP gap");
  const std::map<GroupId, GroupSelectionStats> eo{{"A", {"A", 6, 2, 4, 2}}, {"B", {"B", 6, 4, 5, 4}}};
  near(eo_gap(eo, "A", "B"), -0.3, "EO gap");
  const std::vector<double> p{1, 0}, q{0.5, 0.5};
  near(jensen_shannon(p, q), 0.3113, "JSD");
  near(emd(S({0, 1}), S({1, 2})).value, 1.0, "EMD");
  const std::vector<double> rms{0.3, -0.4};
  near(rms_aggregate(rms), 0.35355, "RMS");
  const std::vector<double> xs{1, 2, 3}, ys{1, 3, 2};
  near(pearson(xs, ys), 0.5, "Pearson");
  const std::vector<double> m{1, 2, 3};
  near(dist_moments(m).excess_kurtosis, -1.5, "excess kurtosis");
  near(delta_pointwise(S({1, 0, 1}), S({0, 0, 1})).value, 1.0 / 3.0, "delta");
  near(pointwise_score({"c", LabelProbs{{"No", 0.2}, {"Yes", 0.6}}}, LabelScale::binary()), 0.75, "pointwise score");
  const std::vector<TokenLogprob> top{{"Yes", std::log(0.7)}, {"yes", std::log(0.1)}, {"No", std::log(0.15)}};
  const auto probs = extract_label_probs(top, LabelScale::binary());
  o.require(probs.has_value(), "label extraction");
  if (probs) near(probs->at("Yes"), 0.8, "merged Yes mass");
  near(rabbi_p_value(S({3, 1, 2}), S({2, 2, 4}), {.tie_correction = false}), 0.27523, "uncorrected p-value");
}

void criterion_10(Outcome& o) {
  using rabbi::testing::TempDir;
  TempDir dir;
  write_text_file(dir / "run.json", R"({"seed": 5, "rounds": 300, "quotas": [1, 2, 3],
                                        "synth": {"regime": "resume", "models": 4}})");
  const auto cfg = (dir / "run.json").string();
  o.require(rabbi::testing::run_cli({"pipeline", "--config", cfg, "--out", (dir / "a").string()}) == 0, "pipeline run 1");
  o.require(rabbi::testing::run_cli({"pipeline", "--config", cfg, "--out", (dir / "b").string(), "--jobs", "4"}) == 0,
            "pipeline run 2");
  const auto a = rabbi::testing::read_tree(dir / "a");
  o.require(!a.empty() && a == rabbi::testing::read_tree(dir / "b"), "pipeline reports differ");

  rabbi::testing::StubServer server([](const std::string&) {
    return std::pair{200, rabbi::testing::chat_body("Yes", {{"Yes", -0.3}, {"No", -1.4}})};
  });
  std::string items;
  for (int i = 0; i < 8; ++i) {
    items += nlohmann::json{{"candidate_id", "c" + std::to_string(i)}, {"group", i % 2 ? "A" : "B"},
                            {"subtask", "job"}, {"qualified", 1}, {"text", "resume " + std::to_string(i)}}
                 .dump() +
             "\n";
  }
  write_text_file(dir / "items.jsonl", items);
  write_text_file(dir / "contexts.json", R"({"job": "Run the payroll system."})");
  const auto collect = [&](const std::string& out) {
    return rabbi::testing::run_cli({"collect", "--endpoint", server.base_url(), "--model", "stub", "--template",
                                    "resume_point", "--items", (dir / "items.jsonl").string(), "--contexts",
                                    (dir / "contexts.json").string(), "--cache-dir",
                                    (dir / "cache").string(), "--out", (dir / out).string()});
  };
  o.require(collect("c1") == 0, "first collection");
  const int cold = server.requests();
  o.require(collect("c2") == 0, "replayed collection");
  const int replay_calls = server.requests() - cold;
  o.require(cold == 8 && replay_calls == 0, "cache replay hit the network");
  o.require(rabbi::testing::read_tree(dir / "c1") == rabbi::testing::read_tree(dir / "c2"), "replay output differs");
  o.detail << a.size() << " report files identical; replay network calls " << replay_calls << "; ";
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "RABBI oracle equivalence", 5, criterion_1},
      {2, "U-statistic identity on tie-free samples", 0, criterion_2},
      {3, "metric invariant suite", 10, criterion_3},
      {4, "monotone-transform invariance", 0, criterion_4},
      {5, "simulation correctness", 30, criterion_5},
      {6, "adversarial failure-mode reproduction", 0, criterion_6},
      {7, "synthetic predictive validity", 120, criterion_7},
      {8, "NDCG correctness", 0, criterion_8},
      {9, "hand-derived values", 0, criterion_9},
      {10, "determinism and cache replay", 0, criterion_10},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what() << "; ";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail << "runtime over " << c.budget_s << " s; ";
    }
    failures += !o.pass;
    std::printf("%s criterion %d: %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
