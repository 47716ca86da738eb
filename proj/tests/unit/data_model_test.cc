#include "rabbi/data_model.h"

#include <gtest/gtest.h>

#include "rabbi/error.h"
#include "rabbi/report.h"
#include "test_support.h"

namespace rabbi {
namespace {

using testing::TempDir;

const char* kTwoLines =
    R"({"candidate_id":"c1","group":"A","subtask":"t","qualified":1,"label_probs":{"Yes":0.6,"No":0.2}})"
    "\n"
    R"({"candidate_id":"c2","group":"B","subtask":"t","qualified":0,"score":0.4})"
    "\n";

TEST(LoadPointwise, TwoValidLines) {
  TempDir dir;
  write_text_file(dir / "p.jsonl", kTwoLines);
  const auto data = load_pointwise(dir / "p.jsonl", LabelScale::binary());
  ASSERT_EQ(data.records.size(), 2u);
  EXPECT_TRUE(data.warnings.empty());
  EXPECT_EQ(data.records[0].candidate.group, "A");
  EXPECT_TRUE(data.records[0].candidate.qualified);
  ASSERT_NE(data.records[0].prediction.label_probs(), nullptr);
  EXPECT_EQ(data.records[1].prediction.score(), 0.4);
}

TEST(LoadPointwise, UnknownLabelIsRejected) {
  const std::string line = R"({"candidate_id":"c","group":"A","subtask":"t","qualified":1,"label_probs":{"Maybe":1.0}})";
  try {
    parse_pointwise_line(line, LabelScale::binary());
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown label"), std::string::npos) << e.what();
  }
}

TEST(LoadPointwise, LabelProbsNeedAScale) {
  const std::string line = R"({"candidate_id":"c","group":"A","subtask":"t","label_probs":{"Yes":1.0}})";
  EXPECT_THROW(parse_pointwise_line(line, std::nullopt), InputError);
}

TEST(LoadPointwise, ErrorsCarryLineNumbers) {
  TempDir dir;
  write_text_file(dir / "p.jsonl", std::string(kTwoLines) + "{not json}\n");
  try {
    load_pointwise(dir / "p.jsonl", LabelScale::binary());
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(LoadPointwise, InvalidMarkedLinesAreSkipped) {
  TempDir dir;
  write_text_file(dir / "p.jsonl", std::string(kTwoLines) +
                                       R"({"candidate_id":"c3","group":"B","subtask":"t","invalid":true,"error":"x"})"
                                       "\n");
  const auto data = load_pointwise(dir / "p.jsonl", LabelScale::binary());
  EXPECT_EQ(data.records.size(), 2u);
  EXPECT_EQ(data.warnings.size(), 1u);
}

TEST(LoadPointwise, ResumeShapedFile) {
  std::vector<PointwiseRecord> records;
  const std::vector<std::string> groups{"WM", "WF", "BM", "BF", "AM", "AF", "HM", "HF"};
  for (const auto& g : groups) {
    for (int i = 0; i < 100; ++i) {
      records.push_back({{g + std::to_string(i), g, i % 2 == 0, "resume"}, {g + std::to_string(i), 0.01 * i}});
    }
  }
  TempDir dir;
  write_pointwise(dir / "p.jsonl", records);
  const auto data = load_pointwise(dir / "p.jsonl", std::nullopt);
  ASSERT_EQ(data.records.size(), 800u);
  EXPECT_EQ(data.records, records);
  const CandidateIndex index(candidates_of(data.records));
  EXPECT_EQ(index.groups("resume").size(), 8u);

  const auto summary = validate_dataset(candidates_of(data.records), {});
  EXPECT_TRUE(summary.ok());
  ASSERT_EQ(summary.per_group.size(), 8u);
  for (const auto& [g, n] : summary.per_group) EXPECT_EQ(n, 100) << g;
}

std::vector<PairwiseResponse> full_pool() {
  std::vector<PairwiseResponse> out;
  const std::vector<std::string> ids{"a", "b", "c"};
  for (const auto& x : ids) {
    for (const auto& y : ids) {
      if (x != y) out.push_back({"t", "p", x, y, Verdict::kFirst});
    }
  }
  return out;
}

TEST(LoadPairwise, CompletePoolHasNoWarnings) {
  TempDir dir;
  write_pairwise(dir / "r.jsonl", full_pool());
  const auto data = load_pairwise(dir / "r.jsonl");
  EXPECT_EQ(data.responses.size(), 6u);
  EXPECT_TRUE(data.warnings.empty());
}

TEST(LoadPairwise, MissingOrderIsReported) {
  auto r = full_pool();
  r.pop_back();
  TempDir dir;
  write_pairwise(dir / "r.jsonl", r);
  const auto data = load_pairwise(dir / "r.jsonl");
  EXPECT_EQ(data.responses.size(), 5u);
  EXPECT_EQ(data.warnings.size(), 1u);
}

TEST(Verdict, AliasesNormalize) {
  EXPECT_EQ(parse_verdict("both"), Verdict::kTie);
  EXPECT_EQ(parse_verdict(" Equally Good "), Verdict::kTie);
  EXPECT_EQ(parse_verdict("FIRST"), Verdict::kFirst);
  EXPECT_EQ(parse_verdict("second"), Verdict::kSecond);
  EXPECT_FALSE(parse_verdict("maybe"));
  const auto r = parse_pairwise_line(R"({"subtask":"t","pool_id":"p","first":"a","second":"b","verdict":"both"})");
  EXPECT_EQ(r.verdict, Verdict::kTie);
}

TEST(Pool, QuotaBounds) {
  EXPECT_NO_THROW(validate_pool({"p", "t", {"1", "2", "3", "4", "5", "6", "7", "8"}, 2}));
  EXPECT_NO_THROW(validate_pool({"p", "t", {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10"}, 1}));
  EXPECT_THROW(validate_pool({"p", "t", {"1", "2", "3"}, 3}), InputError);
  EXPECT_THROW(validate_pool({"p", "t", {"1", "1", "3"}, 1}), InputError);
}

TEST(Pool, JsonRoundTrip) {
  const PoolSpec p{"p1", "t", {"x", "y", "z"}, 2};
  EXPECT_EQ(parse_pool_line(to_json_line(p)), p);
}

TEST(Validate, CleanDataset) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}, {"b", "B", true, "t"}};
  const std::vector<PoolSpec> pools{{"p", "t", {"a", "b"}, 1}};
  const auto s = validate_dataset(c, pools);
  EXPECT_TRUE(s.issues.empty());
  EXPECT_TRUE(s.ok());
}

TEST(Validate, DanglingPoolMember) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}, {"b", "B", true, "t"}};
  const std::vector<PoolSpec> pools{{"p", "t", {"a", "X9"}, 1}};
  const auto s = validate_dataset(c, pools);
  ASSERT_EQ(s.error_count(), 1);
  EXPECT_EQ(s.issues[0].code, "dangling_reference");
  EXPECT_FALSE(s.ok());
}

TEST(Validate, WarningsOnlyIsOk) {
  const std::vector<CandidateRecord> c{{"a", "A", false, "t"}, {"b", "B", true, "t"}};
  const auto s = validate_dataset(c, {});
  EXPECT_GT(s.warning_count(), 0);
  EXPECT_TRUE(s.ok());
}

TEST(LabelScale, Construction) {
  EXPECT_EQ(LabelScale::rating(1, 5).entries().size(), 5u);
  EXPECT_DOUBLE_EQ(LabelScale::rating(1, 5).max_relevance(), 5.0);
  EXPECT_THROW(LabelScale({{"x", 1}, {"x", 2}}), InputError);
  const auto s = LabelScale::from_json(LabelScale::binary().to_json());
  EXPECT_EQ(s.relevance("Yes"), 1.0);
}

TEST(CandidateIndex, DuplicateIdsRejected) {
  const std::vector<CandidateRecord> c{{"a", "A", true, "t"}, {"a", "B", true, "t"}};
  EXPECT_THROW(CandidateIndex{c}, InputError);
  const std::vector<CandidateRecord> ok{{"a", "A", true, "t"}, {"a", "B", true, "u"}};
  const CandidateIndex index(ok);
  EXPECT_EQ(index.at("u", "a").group, "B");
  EXPECT_EQ(index.find("t", "zz"), nullptr);
}

}  // namespace
}  // namespace rabbi
