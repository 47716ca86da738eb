#include "rabbi/audit.h"

#include <gtest/gtest.h>

#include <algorithm>

#include "rabbi/error.h"
#include "rabbi/report.h"
#include "rabbi/synthetic_bench.h"

namespace rabbi {
namespace {

std::size_t count(const AuditResult& r, Metric m, bool qualified) {
  return static_cast<std::size_t>(std::count_if(r.records.begin(), r.records.end(), [&](const BiasRecord& b) {
    return b.metric == m && b.qualified_only == qualified;
  }));
}

TEST(Audit, ResumeShapedPointwise) {
  const auto spec = gen_benchmark(Regime::kResume, 1, 3).front();
  const auto data = gen_scores(spec);
  const auto candidates = data.candidates();
  const CandidateIndex index(candidates);
  const std::vector<ScoreTable> tables{data.scores};
  const AuditResult r = audit({"m", &index, ScoringMode::kPointwise, tables, {}}, {.default_reference = "White Male"});
  for (const auto m : {Metric::kRabbi, Metric::kDeltaPoint, Metric::kJsd, Metric::kEmd}) {
    EXPECT_EQ(count(r, m, false), 7u) << to_string(m);
    EXPECT_EQ(count(r, m, true), 7u) << to_string(m);
  }
  EXPECT_EQ(count(r, Metric::kDeltaPair, false), 0u);
  for (const auto& b : r.records) {
    EXPECT_NE(b.protected_group, "White Male");
    EXPECT_EQ(b.reference, "White Male");
    if (b.metric == Metric::kRabbi) EXPECT_TRUE(b.p_value.has_value());
  }
  EXPECT_EQ(r.groups.size(), 8u);
}

TEST(Audit, MissingReferenceIsInputError) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}, {"b", "B", true, "t"}};
  const CandidateIndex index(c);
  const std::vector<ScoreTable> tables{{"t", ScoringMode::kPointwise, "", {{"a", 1}, {"b", 0}}}};
  EXPECT_THROW(audit({"m", &index, ScoringMode::kPointwise, tables, {}}, {.default_reference = "Z"}), InputError);
  EXPECT_THROW(audit({"m", &index, ScoringMode::kPointwise, tables, {}}, {}), InputError);
}

TEST(Audit, EmptyQualifiedSubsetIsUndefined) {
  const std::vector<CandidateRecord> c{
      {"a1", "A", false, "t"}, {"a2", "A", false, "t"}, {"b1", "B", true, "t"}, {"b2", "B", false, "t"}};
  const CandidateIndex index(c);
  const std::vector<ScoreTable> tables{{"t", ScoringMode::kPointwise, "", {{"a1", 1}, {"a2", 0}, {"b1", 0.5}, {"b2", 0}}}};
  const auto r = audit({"m", &index, ScoringMode::kPointwise, tables, {}}, {.default_reference = "B"});
  for (const auto& b : r.records) {
    if (b.qualified_only) EXPECT_FALSE(b.value.has_value()) << to_string(b.metric);
    else EXPECT_TRUE(b.value.has_value()) << to_string(b.metric);
  }
  EXPECT_FALSE(r.notices.empty());
}

TEST(Audit, PairwiseOmitsDistributionMetrics) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}, {"b", "B", true, "t"}, {"c", "B", true, "t"}};
  const CandidateIndex index(c);
  std::vector<PairwiseResponse> r;
  for (const auto* x : {"a", "b", "c"}) {
    for (const auto* y : {"a", "b", "c"}) {
      if (std::string(x) != y) r.push_back({"t", "p", x, y, x[0] == 'a' ? Verdict::kFirst : Verdict::kSecond});
    }
  }
  const auto tables = pairwise_score_tables(r);
  const auto out = audit({"m", &index, ScoringMode::kPairwise, tables, r}, {.default_reference = "B"});
  EXPECT_EQ(count(out, Metric::kRabbi, false), 1u);
  EXPECT_EQ(count(out, Metric::kDeltaPair, false), 1u);
  EXPECT_EQ(count(out, Metric::kJsd, false), 0u);
  EXPECT_EQ(count(out, Metric::kEmd, false), 0u);
  EXPECT_FALSE(out.notices.empty());
  for (const auto& b : out.records) {
    if (!b.qualified_only) EXPECT_GT(*b.value, 0.0);
  }
}

TEST(Audit, CsvRoundTrip) {
  const std::vector<BiasRecord> rows{{"m", "t", Metric::kRabbi, "A", "B", false, 0.25, 0.01, true},
                                     {"m", "t", Metric::kEmd, "A", "B", true, std::nullopt, std::nullopt, false}};
  const auto back = parse_bias_csv(bias_records_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].metric, Metric::kRabbi);
  EXPECT_DOUBLE_EQ(*back[0].value, 0.25);
  EXPECT_DOUBLE_EQ(*back[0].p_value, 0.01);
  EXPECT_TRUE(back[1].qualified_only);
  EXPECT_FALSE(back[1].value.has_value());
  EXPECT_FALSE(back[1].directional);
}

}  // namespace
}  // namespace rabbi
