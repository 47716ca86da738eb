#include "rabbi/scoring.h"

#include <gtest/gtest.h>

#include <random>

#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi {
namespace {

TEST(Normalize, ProportionalRenormalization) {
  const auto n = normalize_label_probs({{"No", 0.2}, {"Yes", 0.6}}, LabelScale::binary());
  EXPECT_NEAR(n.at("No"), 0.25, 1e-12);
  EXPECT_NEAR(n.at("Yes"), 0.75, 1e-12);
}

TEST(Normalize, MissingLabelCountsAsZero) {
  const auto n = normalize_label_probs({{"Yes", 1.0}}, LabelScale::binary());
  EXPECT_DOUBLE_EQ(n.at("No"), 0.0);
  EXPECT_DOUBLE_EQ(n.at("Yes"), 1.0);
}

TEST(Normalize, NoMassIsDomainError) {
  EXPECT_THROW(normalize_label_probs({{"No", 0.0}, {"Yes", 0.0}}, LabelScale::binary()), DomainError);
}

TEST(PointwiseScore, Examples) {
  EXPECT_NEAR(pointwise_score({"c", LabelProbs{{"No", 0.27}, {"Yes", 0.73}}}, LabelScale::binary()), 0.73, 1e-12);
  EXPECT_NEAR(pointwise_score({"c", LabelProbs{{"1", 0.1}, {"2", 0.2}, {"3", 0.4}, {"4", 0.2}, {"5", 0.1}}},
                              LabelScale::rating(1, 5)),
              3.0, 1e-12);
  EXPECT_NEAR(pointwise_score({"c", LabelProbs{{"No", 0.2}, {"Yes", 0.6}}}, LabelScale::binary()), 0.75, 1e-12);
  EXPECT_DOUBLE_EQ(pointwise_score({"c", 0.42}, LabelScale::binary()), 0.42);
}

TEST(PointwiseScoreTables, OneTablePerSubtask) {
  std::vector<PointwiseRecord> r{{{"a", "A", true, "u"}, {"a", 0.1}},
                                 {{"b", "B", true, "t"}, {"b", 0.2}},
                                 {{"c", "B", true, "u"}, {"c", 0.3}}};
  const auto tables = pointwise_score_tables(r, std::nullopt);
  ASSERT_EQ(tables.size(), 2u);
  EXPECT_EQ(tables[0].subtask, "t");
  EXPECT_EQ(tables[1].entries.size(), 2u);
  EXPECT_EQ(tables[1].find("c"), 0.3);
  EXPECT_FALSE(tables[1].find("b"));
}

PairwiseResponse R(std::string first, std::string second, Verdict v) { return {"t", "p", first, second, v}; }

TEST(PairwiseScores, HandEnumeratedPool) {
  const std::vector<PairwiseResponse> r{
      R("a", "b", Verdict::kFirst),  R("b", "a", Verdict::kSecond),  // a beats b both orders
      R("a", "c", Verdict::kFirst),  R("c", "a", Verdict::kFirst),   // flipped
      R("b", "c", Verdict::kTie),    R("c", "b", Verdict::kFirst),   // tie + c win
  };
  const auto t = pairwise_scores(r);
  EXPECT_NEAR(*t.find("a"), 1.5, 1e-12);
  EXPECT_NEAR(*t.find("b"), 0.25, 1e-12);
  EXPECT_NEAR(*t.find("c"), 1.25, 1e-12);
  EXPECT_EQ(t.pool_id, "p");
  EXPECT_EQ(t.mode, ScoringMode::kPairwise);
}

TEST(PairwiseScores, TwoCandidatePools) {
  auto t = pairwise_scores(std::vector{R("a", "b", Verdict::kFirst), R("b", "a", Verdict::kSecond)});
  EXPECT_DOUBLE_EQ(*t.find("a"), 1.0);
  EXPECT_DOUBLE_EQ(*t.find("b"), 0.0);
  t = pairwise_scores(std::vector{R("a", "b", Verdict::kTie), R("b", "a", Verdict::kTie)});
  EXPECT_DOUBLE_EQ(*t.find("a"), 0.5);
  EXPECT_DOUBLE_EQ(*t.find("b"), 0.5);
}

TEST(PairwiseScores, ConservationUnderRandomVerdicts) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> verdict(0, 3), size(2, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size(rng);
    std::vector<PairwiseResponse> r;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) r.push_back(R(std::to_string(i), std::to_string(j), static_cast<Verdict>(verdict(rng))));
      }
    }
    double total = 0;
    for (const auto& [id, s] : pairwise_scores(r).entries) total += s;
    EXPECT_NEAR(total, n * (n - 1) / 2.0, 1e-9);
  }
}

TEST(PairwiseScores, MixedPoolsRejected) {
  std::vector<PairwiseResponse> r{R("a", "b", Verdict::kFirst), {"t", "q", "b", "a", Verdict::kFirst}};
  EXPECT_THROW(pairwise_scores(r), InputError);
  EXPECT_THROW(pairwise_scores(std::vector<PairwiseResponse>{}), InputError);
  EXPECT_EQ(pairwise_score_tables(r).size(), 2u);
}

TEST(Consistency, AllRegular) {
  std::vector<PairwiseResponse> r;
  for (int i = 0; i < 10; ++i) {
    const std::string a = "a" + std::to_string(i), b = "b" + std::to_string(i);
    r.push_back(R(a, b, Verdict::kFirst));
    r.push_back(R(b, a, Verdict::kSecond));
  }
  const auto s = pairwise_consistency_stats(r);
  EXPECT_EQ(s.pairs, 10);
  EXPECT_DOUBLE_EQ(s.regular_pct, 100.0);
}

TEST(Consistency, MixedCounts) {
  const std::vector<PairwiseResponse> r{
      R("a", "b", Verdict::kFirst), R("b", "a", Verdict::kSecond),  // regular
      R("c", "d", Verdict::kFirst), R("d", "c", Verdict::kSecond),  // regular
      R("e", "f", Verdict::kFirst), R("f", "e", Verdict::kFirst),   // flipped
      R("g", "h", Verdict::kTie),   R("h", "g", Verdict::kFirst),   // tie
  };
  const auto s = pairwise_consistency_stats(r);
  EXPECT_DOUBLE_EQ(s.regular_pct, 50.0);
  EXPECT_DOUBLE_EQ(s.flipped_pct, 25.0);
  EXPECT_DOUBLE_EQ(s.tie_pct, 25.0);
  EXPECT_DOUBLE_EQ(s.invalid_pct, 0.0);
}

TEST(Consistency, InvalidTakesPrecedence) {
  const std::vector<PairwiseResponse> r{R("a", "b", Verdict::kInvalid), R("b", "a", Verdict::kTie)};
  const auto pairs = group_pairs(r);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(classify_pair(pairs[0]), PairClass::kInvalid);
  EXPECT_FALSE(consistent_winner(pairs[0]));
}

TEST(ScoreCsv, Columns) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}};
  const CandidateIndex index(c);
  const std::vector<ScoreTable> t{{"t", ScoringMode::kPointwise, "", {{"a", 0.5}}}};
  const auto csv = score_tables_csv(t, index);
  EXPECT_EQ(csv.header, (std::vector<std::string>{"subtask", "pool_id", "candidate_id", "group", "score", "mode"}));
  ASSERT_EQ(csv.rows.size(), 1u);
  EXPECT_EQ(csv.rows[0][3], "A");
}

}  // namespace
}  // namespace rabbi
