#pragma once

// Shared domain types and the line-delimited JSON file formats.
//
// Pointwise line:
//   {"candidate_id": str, "group": str, "subtask": str, "qualified": 0|1,
//    "label_probs": {str: float}}            -- or "score": float instead
// Pairwise line:
//   {"subtask": str, "pool_id": str, "first": str, "second": str,
//    "verdict": "first"|"second"|"tie"|"invalid"}
// Pool line:
//   {"pool_id": str, "subtask": str, "members": [str], "k": int}

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rabbi {

using GroupId = std::string;

struct CandidateRecord {
  std::string candidate_id;
  GroupId group;
  bool qualified = false;
  std::string subtask;

  friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

// Raw label probabilities as returned by a model; not necessarily normalized.
using LabelProbs = std::map<std::string, double, std::less<>>;

struct PointwisePrediction {
  std::string candidate_id;
  // Either per-label probabilities or an externally computed score.
  std::variant<LabelProbs, double> evidence;

  const LabelProbs* label_probs() const { return std::get_if<LabelProbs>(&evidence); }
  std::optional<double> score() const;

  friend bool operator==(const PointwisePrediction&, const PointwisePrediction&) = default;
};

struct PointwiseRecord {
  CandidateRecord candidate;
  PointwisePrediction prediction;

  friend bool operator==(const PointwiseRecord&, const PointwiseRecord&) = default;
};

enum class Verdict { kFirst, kSecond, kTie, kInvalid };

std::string_view to_string(Verdict v);

// Accepts the canonical names plus the tie aliases "both", "equal" and
// "equally good". Case-insensitive, surrounding whitespace ignored.
std::optional<Verdict> parse_verdict(std::string_view text);

struct PairwiseResponse {
  std::string subtask;
  std::string pool_id;
  std::string first;
  std::string second;
  Verdict verdict = Verdict::kInvalid;

  friend bool operator==(const PairwiseResponse&, const PairwiseResponse&) = default;
};

class LabelScale {
 public:
  struct Entry {
    std::string label;
    double relevance = 0.0;
  };

  // Throws InputError on empty, duplicate labels or non-finite relevance.
  explicit LabelScale(std::vector<Entry> entries);

  // {No: 0, Yes: 1}.
  static LabelScale binary();
  // Labels "lo".."hi" with relevance equal to the integer value.
  static LabelScale rating(int lo, int hi);
  // {"labels": [{"label": ..., "relevance": ...}, ...]}
  static LabelScale from_json(std::string_view json_text);

  const std::vector<Entry>& entries() const { return entries_; }
  std::optional<double> relevance(std::string_view label) const;
  bool contains(std::string_view label) const { return relevance(label).has_value(); }
  double min_relevance() const;
  double max_relevance() const;
  std::string to_json() const;

 private:
  std::vector<Entry> entries_;
};

struct PoolSpec {
  std::string pool_id;
  std::string subtask;
  std::vector<std::string> members;
  int k = 1;

  std::size_t size() const { return members.size(); }
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

// 1 <= k < n, members distinct and non-empty, ids non-empty.
void validate_pool(const PoolSpec& pool);

// Lookup of candidates by (subtask, candidate_id).
class CandidateIndex {
 public:
  CandidateIndex() = default;
  // Throws InputError on duplicate ids within a subtask or invalid records.
  explicit CandidateIndex(std::span<const CandidateRecord> records);

  const CandidateRecord* find(std::string_view subtask, std::string_view id) const;
  const CandidateRecord& at(std::string_view subtask, std::string_view id) const;
  std::size_t size() const { return size_; }

  // Sorted group ids present in a subtask (all subtasks when empty).
  std::vector<GroupId> groups(std::string_view subtask = {}) const;
  std::vector<std::string> subtasks() const;
  std::vector<CandidateRecord> records(std::string_view subtask = {}) const;

 private:
  using ById = std::map<std::string, CandidateRecord, std::less<>>;
  std::map<std::string, ById, std::less<>> by_subtask_;
  std::size_t size_ = 0;
};

struct PointwiseData {
  std::vector<PointwiseRecord> records;
  std::vector<std::string> warnings;
};

struct PairwiseData {
  std::vector<PairwiseResponse> responses;
  // One entry per ordered prompt whose reverse order is absent.
  std::vector<std::string> warnings;
};

// Label-probability lines need a scale; score-only files may pass nullopt.
// Lines flagged {"invalid": true} (failed collection) are skipped with a warning.
PointwiseData load_pointwise(const std::filesystem::path& path,
                             const std::optional<LabelScale>& scale);
// Candidate fields only; prediction fields are ignored if present.
std::vector<CandidateRecord> load_candidates(const std::filesystem::path& path);
PairwiseData load_pairwise(const std::filesystem::path& path);
std::vector<PoolSpec> load_pools(const std::filesystem::path& path);

// Line parsers; throw InputError with a description (no line number).
PointwiseRecord parse_pointwise_line(std::string_view line, const std::optional<LabelScale>& scale);
PairwiseResponse parse_pairwise_line(std::string_view line);
PoolSpec parse_pool_line(std::string_view line);

std::string to_json_line(const CandidateRecord& record);
std::string to_json_line(const PointwiseRecord& record);
std::string to_json_line(const PairwiseResponse& response);
std::string to_json_line(const PoolSpec& pool);

void write_candidates(const std::filesystem::path& path, std::span<const CandidateRecord> records);
void write_pointwise(const std::filesystem::path& path, std::span<const PointwiseRecord> records);
void write_pairwise(const std::filesystem::path& path, std::span<const PairwiseResponse> responses);
void write_pools(const std::filesystem::path& path, std::span<const PoolSpec> pools);

// Ordered prompts (first, second) whose reverse (second, first) is missing
// within the same (subtask, pool).
std::vector<std::string> find_missing_orders(std::span<const PairwiseResponse> responses);

std::vector<CandidateRecord> candidates_of(std::span<const PointwiseRecord> records);

struct ValidationIssue {
  enum class Severity { kError, kWarning };
  Severity severity = Severity::kError;
  std::string code;
  std::string message;
};

struct ValidationSummary {
  std::map<GroupId, int> per_group;
  std::map<std::string, int> per_subtask;
  std::map<GroupId, int> qualified_per_group;
  int pools = 0;
  int pairwise_responses = 0;
  std::vector<ValidationIssue> issues;

  int error_count() const;
  int warning_count() const;
  bool ok() const { return error_count() == 0; }
  std::string to_json() const;
};

ValidationSummary validate_dataset(std::span<const CandidateRecord> records,
                                   std::span<const PoolSpec> pools,
                                   std::span<const PairwiseResponse> responses = {});

}  // namespace rabbi
