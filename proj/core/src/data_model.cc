#include "rabbi/data_model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "rabbi/error.h"
#include "text_util.h"

namespace rabbi {

using nlohmann::json;

namespace {

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("expected a JSON object");
  return j;
}

std::string required_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw InputError(std::string("missing field \"") + key + "\"");
  if (!it->is_string()) throw InputError(std::string("field \"") + key + "\" must be a string");
  std::string value = it->get<std::string>();
  if (value.empty()) throw InputError(std::string("field \"") + key + "\" must be non-empty");
  return value;
}

bool parse_qualified(const json& j) {
  const auto it = j.find("qualified");
  if (it == j.end()) throw InputError("missing field \"qualified\"");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number_integer()) {
    const auto v = it->get<std::int64_t>();
    if (v == 0 || v == 1) return v == 1;
  }
  throw InputError("field \"qualified\" must be 0 or 1");
}

CandidateRecord parse_candidate(const json& j) {
  CandidateRecord c;
  c.candidate_id = required_string(j, "candidate_id");
  c.group = required_string(j, "group");
  c.subtask = required_string(j, "subtask");
  c.qualified = parse_qualified(j);
  return c;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      fn(line, line_no);
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

json candidate_json(const CandidateRecord& c) {
  return json{{"candidate_id", c.candidate_id},
              {"group", c.group},
              {"subtask", c.subtask},
              {"qualified", c.qualified ? 1 : 0}};
}

}  // namespace

std::optional<double> PointwisePrediction::score() const {
  if (const auto* s = std::get_if<double>(&evidence)) return *s;
  return std::nullopt;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kFirst: return "first";
    case Verdict::kSecond: return "second";
    case Verdict::kTie: return "tie";
    case Verdict::kInvalid: return "invalid";
  }
  return "invalid";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  const std::string v = detail::to_lower(detail::trim(text));
  if (v == "first") return Verdict::kFirst;
  if (v == "second") return Verdict::kSecond;
  if (v == "tie" || v == "both" || v == "equal" || v == "equally good") return Verdict::kTie;
  if (v == "invalid") return Verdict::kInvalid;
  return std::nullopt;
}

// ---- LabelScale -----------------------------------------------------------

LabelScale::LabelScale(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw InputError("label scale must contain at least one label");
  std::set<std::string, std::less<>> seen;
  for (const auto& e : entries_) {
    if (e.label.empty()) throw InputError("label scale contains an empty label");
    if (!std::isfinite(e.relevance)) throw InputError("relevance of \"" + e.label + "\" is not finite");
    if (!seen.insert(e.label).second) throw InputError("duplicate label \"" + e.label + "\" in scale");
  }
}

LabelScale LabelScale::binary() { return LabelScale({{"No", 0.0}, {"Yes", 1.0}}); }

LabelScale LabelScale::rating(int lo, int hi) {
  if (lo > hi) throw InputError("rating scale bounds are reversed");
  std::vector<Entry> entries;
  for (int v = lo; v <= hi; ++v) entries.push_back({std::to_string(v), static_cast<double>(v)});
  return LabelScale(std::move(entries));
}

LabelScale LabelScale::from_json(std::string_view json_text) {
  const json j = parse_object(json_text);
  const auto it = j.find("labels");
  if (it == j.end() || !it->is_array()) throw InputError("label scale needs a \"labels\" array");
  std::vector<Entry> entries;
  for (const auto& e : *it) {
    if (!e.is_object() || !e.contains("label") || !e.contains("relevance") ||
        !e["label"].is_string() || !e["relevance"].is_number()) {
      throw InputError("label scale entries need \"label\" and numeric \"relevance\"");
    }
    entries.push_back({e["label"].get<std::string>(), e["relevance"].get<double>()});
  }
  return LabelScale(std::move(entries));
}

std::optional<double> LabelScale::relevance(std::string_view label) const {
  for (const auto& e : entries_) {
    if (e.label == label) return e.relevance;
  }
  return std::nullopt;
}

double LabelScale::min_relevance() const {
  return std::min_element(entries_.begin(), entries_.end(),
                          [](const Entry& a, const Entry& b) { return a.relevance < b.relevance; })
      ->relevance;
}

double LabelScale::max_relevance() const {
  return std::max_element(entries_.begin(), entries_.end(),
                          [](const Entry& a, const Entry& b) { return a.relevance < b.relevance; })
      ->relevance;
}

std::string LabelScale::to_json() const {
  json labels = json::array();
  for (const auto& e : entries_) labels.push_back({{"label", e.label}, {"relevance", e.relevance}});
  return json{{"labels", labels}}.dump();
}

// ---- pools ----------------------------------------------------------------

void validate_pool(const PoolSpec& pool) {
  if (pool.pool_id.empty()) throw InputError("pool_id must be non-empty");
  if (pool.subtask.empty()) throw InputError("pool " + pool.pool_id + ": subtask must be non-empty");
  const auto n = static_cast<int>(pool.members.size());
  if (pool.k < 1 || pool.k >= n) {
    throw InputError("pool " + pool.pool_id + ": quota k=" + std::to_string(pool.k) +
                     " must satisfy 1 <= k < n=" + std::to_string(n));
  }
  std::set<std::string_view> seen;
  for (const auto& m : pool.members) {
    if (m.empty()) throw InputError("pool " + pool.pool_id + ": empty member id");
    if (!seen.insert(m).second) throw InputError("pool " + pool.pool_id + ": duplicate member \"" + m + "\"");
  }
}

// ---- CandidateIndex -------------------------------------------------------

CandidateIndex::CandidateIndex(std::span<const CandidateRecord> records) {
  for (const auto& r : records) {
    if (r.candidate_id.empty()) throw InputError("candidate_id must be non-empty");
    if (r.group.empty()) throw InputError("candidate " + r.candidate_id + ": group must be non-empty");
    auto& by_id = by_subtask_[r.subtask];
    if (!by_id.emplace(r.candidate_id, r).second) {
      throw InputError("duplicate candidate_id \"" + r.candidate_id + "\" in subtask \"" + r.subtask + "\"");
    }
    ++size_;
  }
}

const CandidateRecord* CandidateIndex::find(std::string_view subtask, std::string_view id) const {
  const auto s = by_subtask_.find(subtask);
  if (s == by_subtask_.end()) return nullptr;
  const auto c = s->second.find(id);
  return c == s->second.end() ? nullptr : &c->second;
}

const CandidateRecord& CandidateIndex::at(std::string_view subtask, std::string_view id) const {
  const auto* c = find(subtask, id);
  if (c == nullptr) {
    throw InputError("unknown candidate \"" + std::string(id) + "\" in subtask \"" + std::string(subtask) + "\"");
  }
  return *c;
}

std::vector<GroupId> CandidateIndex::groups(std::string_view subtask) const {
  std::set<GroupId> out;
  for (const auto& [name, by_id] : by_subtask_) {
    if (!subtask.empty() && name != subtask) continue;
    for (const auto& [id, rec] : by_id) out.insert(rec.group);
  }
  return {out.begin(), out.end()};
}

std::vector<std::string> CandidateIndex::subtasks() const {
  std::vector<std::string> out;
  for (const auto& [name, by_id] : by_subtask_) out.push_back(name);
  return out;
}

std::vector<CandidateRecord> CandidateIndex::records(std::string_view subtask) const {
  std::vector<CandidateRecord> out;
  for (const auto& [name, by_id] : by_subtask_) {
    if (!subtask.empty() && name != subtask) continue;
    for (const auto& [id, rec] : by_id) out.push_back(rec);
  }
  return out;
}

// ---- parsing --------------------------------------------------------------

PointwiseRecord parse_pointwise_line(std::string_view line, const std::optional<LabelScale>& scale) {
  const json j = parse_object(line);
  PointwiseRecord rec;
  rec.candidate = parse_candidate(j);
  rec.prediction.candidate_id = rec.candidate.candidate_id;

  const bool has_probs = j.contains("label_probs");
  const bool has_score = j.contains("score");
  if (has_probs == has_score) throw InputError("exactly one of \"label_probs\" or \"score\" is required");

  if (has_score) {
    const auto& s = j["score"];
    if (!s.is_number()) throw InputError("field \"score\" must be a number");
    const double v = s.get<double>();
    if (!std::isfinite(v)) throw InputError("field \"score\" must be finite");
    rec.prediction.evidence = v;
    return rec;
  }

  const auto& probs = j["label_probs"];
  if (!probs.is_object()) throw InputError("field \"label_probs\" must be an object");
  if (!scale) throw InputError("label_probs require a label scale in the run configuration");
  LabelProbs out;
  bool any_positive = false;
  for (const auto& [label, p] : probs.items()) {
    if (!scale->contains(label)) throw InputError("unknown label \"" + label + "\"");
    if (!p.is_number()) throw InputError("probability of \"" + label + "\" must be a number");
    const double v = p.get<double>();
    if (!std::isfinite(v) || v < 0.0) throw InputError("probability of \"" + label + "\" must be >= 0");
    any_positive = any_positive || v > 0.0;
    out.emplace(label, v);
  }
  if (!any_positive) throw InputError("label_probs has no positive probability");
  rec.prediction.evidence = std::move(out);
  return rec;
}

PairwiseResponse parse_pairwise_line(std::string_view line) {
  const json j = parse_object(line);
  PairwiseResponse r;
  r.subtask = required_string(j, "subtask");
  r.pool_id = required_string(j, "pool_id");
  r.first = required_string(j, "first");
  r.second = required_string(j, "second");
  const std::string verdict = required_string(j, "verdict");
  const auto v = parse_verdict(verdict);
  if (!v) throw InputError("unknown verdict \"" + verdict + "\"");
  r.verdict = *v;
  if (r.first == r.second) throw InputError("first and second must differ (\"" + r.first + "\")");
  return r;
}

PoolSpec parse_pool_line(std::string_view line) {
  const json j = parse_object(line);
  PoolSpec p;
  p.pool_id = required_string(j, "pool_id");
  p.subtask = required_string(j, "subtask");
  const auto it = j.find("members");
  if (it == j.end() || !it->is_array()) throw InputError("field \"members\" must be an array");
  for (const auto& m : *it) {
    if (!m.is_string()) throw InputError("pool members must be strings");
    p.members.push_back(m.get<std::string>());
  }
  const auto k = j.find("k");
  if (k == j.end() || !k->is_number_integer()) throw InputError("field \"k\" must be an integer");
  p.k = k->get<int>();
  validate_pool(p);
  return p;
}

// ---- loading --------------------------------------------------------------

PointwiseData load_pointwise(const std::filesystem::path& path, const std::optional<LabelScale>& scale) {
  PointwiseData data;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](std::string_view line, int line_no) {
    {
      const json j = parse_object(line);
      if (const auto inv = j.find("invalid"); inv != j.end() && inv->is_boolean() && inv->get<bool>()) {
        data.warnings.push_back(path.string() + ":" + std::to_string(line_no) +
                                ": invalid prediction for \"" + j.value("candidate_id", std::string("?")) +
                                "\" skipped");
        return;
      }
    }
    auto rec = parse_pointwise_line(line, scale);
    if (!seen.emplace(rec.candidate.subtask, rec.candidate.candidate_id).second) {
      throw InputError("duplicate candidate_id \"" + rec.candidate.candidate_id + "\" in subtask \"" +
                       rec.candidate.subtask + "\"");
    }
    data.records.push_back(std::move(rec));
  });
  return data;
}

std::vector<CandidateRecord> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidateRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](std::string_view line, int) {
    auto c = parse_candidate(parse_object(line));
    if (!seen.emplace(c.subtask, c.candidate_id).second) {
      throw InputError("duplicate candidate_id \"" + c.candidate_id + "\" in subtask \"" + c.subtask + "\"");
    }
    out.push_back(std::move(c));
  });
  return out;
}

PairwiseData load_pairwise(const std::filesystem::path& path) {
  PairwiseData data;
  std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
  for_each_line(path, [&](std::string_view line, int) {
    auto r = parse_pairwise_line(line);
    if (!seen.emplace(r.subtask, r.pool_id, r.first, r.second).second) {
      throw InputError("duplicate ordered prompt (" + r.first + ", " + r.second + ") in pool " + r.pool_id);
    }
    data.responses.push_back(std::move(r));
  });
  data.warnings = find_missing_orders(data.responses);
  return data;
}

std::vector<PoolSpec> load_pools(const std::filesystem::path& path) {
  std::vector<PoolSpec> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(path, [&](std::string_view line, int) {
    auto p = parse_pool_line(line);
    if (!seen.emplace(p.subtask, p.pool_id).second) throw InputError("duplicate pool_id \"" + p.pool_id + "\"");
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<std::string> find_missing_orders(std::span<const PairwiseResponse> responses) {
  std::set<std::tuple<std::string_view, std::string_view, std::string_view, std::string_view>> present;
  for (const auto& r : responses) present.emplace(r.subtask, r.pool_id, r.first, r.second);
  std::vector<std::string> missing;
  for (const auto& r : responses) {
    if (!present.contains({r.subtask, r.pool_id, r.second, r.first})) {
      missing.push_back("pool " + r.pool_id + " (" + r.subtask + "): missing reverse order (" + r.second + ", " +
                        r.first + ")");
    }
  }
  return missing;
}

// ---- serialization --------------------------------------------------------

std::string to_json_line(const CandidateRecord& record) { return candidate_json(record).dump(); }

std::string to_json_line(const PointwiseRecord& record) {
  json j = candidate_json(record.candidate);
  if (const auto* probs = record.prediction.label_probs()) {
    json p = json::object();
    for (const auto& [label, v] : *probs) p[label] = v;
    j["label_probs"] = p;
  } else {
    j["score"] = *record.prediction.score();
  }
  return j.dump();
}

std::string to_json_line(const PairwiseResponse& response) {
  return json{{"subtask", response.subtask},
              {"pool_id", response.pool_id},
              {"first", response.first},
              {"second", response.second},
              {"verdict", std::string(to_string(response.verdict))}}
      .dump();
}

std::string to_json_line(const PoolSpec& pool) {
  return json{{"pool_id", pool.pool_id}, {"subtask", pool.subtask}, {"members", pool.members}, {"k", pool.k}}
      .dump();
}

namespace {
template <typename T>
void write_all(const std::filesystem::path& path, std::span<const T> items) {
  std::vector<std::string> lines;
  lines.reserve(items.size());
  for (const auto& it : items) lines.push_back(to_json_line(it));
  write_lines(path, lines);
}
}  // namespace

void write_candidates(const std::filesystem::path& path, std::span<const CandidateRecord> records) {
  write_all(path, records);
}
void write_pointwise(const std::filesystem::path& path, std::span<const PointwiseRecord> records) {
  write_all(path, records);
}
void write_pairwise(const std::filesystem::path& path, std::span<const PairwiseResponse> responses) {
  write_all(path, responses);
}
void write_pools(const std::filesystem::path& path, std::span<const PoolSpec> pools) { write_all(path, pools); }

std::vector<CandidateRecord> candidates_of(std::span<const PointwiseRecord> records) {
  std::vector<CandidateRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.candidate);
  return out;
}

// ---- validation -----------------------------------------------------------

int ValidationSummary::error_count() const {
  return static_cast<int>(std::count_if(issues.begin(), issues.end(), [](const ValidationIssue& i) {
    return i.severity == ValidationIssue::Severity::kError;
  }));
}

int ValidationSummary::warning_count() const { return static_cast<int>(issues.size()) - error_count(); }

std::string ValidationSummary::to_json() const {
  json j;
  j["per_group"] = per_group;
  j["per_subtask"] = per_subtask;
  j["qualified_per_group"] = qualified_per_group;
  j["pools"] = pools;
  j["pairwise_responses"] = pairwise_responses;
  j["errors"] = error_count();
  j["warnings"] = warning_count();
  json list = json::array();
  for (const auto& i : issues) {
    list.push_back({{"severity", i.severity == ValidationIssue::Severity::kError ? "error" : "warning"},
                    {"code", i.code},
                    {"message", i.message}});
  }
  j["issues"] = list;
  return j.dump(2);
}

ValidationSummary validate_dataset(std::span<const CandidateRecord> records, std::span<const PoolSpec> pools,
                                   std::span<const PairwiseResponse> responses) {
  using Sev = ValidationIssue::Severity;
  ValidationSummary s;
  std::map<std::pair<std::string, std::string>, const CandidateRecord*> index;
  std::map<std::string, std::set<GroupId>> groups_of_subtask;

  for (const auto& r : records) {
    if (r.candidate_id.empty() || r.group.empty()) {
      s.issues.push_back({Sev::kError, "empty_field", "candidate with empty id or group in subtask " + r.subtask});
      continue;
    }
    if (!index.emplace(std::pair{r.subtask, r.candidate_id}, &r).second) {
      s.issues.push_back({Sev::kError, "duplicate_candidate",
                          "duplicate candidate_id \"" + r.candidate_id + "\" in subtask \"" + r.subtask + "\""});
      continue;
    }
    ++s.per_group[r.group];
    ++s.per_subtask[r.subtask];
    s.qualified_per_group[r.group] += r.qualified ? 1 : 0;
    groups_of_subtask[r.subtask].insert(r.group);
  }
  for (const auto& [group, n] : s.qualified_per_group) {
    if (n == 0) {
      s.issues.push_back({Sev::kWarning, "no_qualified",
                          "group \"" + group + "\" has no qualified candidates; equal-opportunity gaps are undefined"});
    }
  }

  s.pools = static_cast<int>(pools.size());
  for (const auto& p : pools) {
    try {
      validate_pool(p);
    } catch (const InputError& e) {
      s.issues.push_back({Sev::kError, "invalid_pool", e.what()});
    }
    for (const auto& m : p.members) {
      if (!index.contains({p.subtask, m})) {
        s.issues.push_back({Sev::kError, "dangling_reference",
                            "pool " + p.pool_id + " references unknown candidate \"" + m + "\""});
      }
    }
  }

  s.pairwise_responses = static_cast<int>(responses.size());
  for (const auto& r : responses) {
    for (const auto* id : {&r.first, &r.second}) {
      if (!index.contains({r.subtask, *id})) {
        s.issues.push_back({Sev::kError, "dangling_reference",
                            "pairwise response in pool " + r.pool_id + " references unknown candidate \"" + *id +
                                "\""});
      }
    }
  }
  for (const auto& m : find_missing_orders(responses)) s.issues.push_back({Sev::kWarning, "missing_order", m});
  return s;
}

}  // namespace rabbi
