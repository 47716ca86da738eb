#include "rabbi/audit.h"

#include <algorithm>
#include <numeric>

#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi {

namespace {

const GroupId& reference_for(const AuditOptions& options, const std::string& subtask) {
  const auto it = options.reference_by_subtask.find(subtask);
  const GroupId& ref = it == options.reference_by_subtask.end() ? options.default_reference : it->second;
  if (ref.empty()) throw InputError("no reference group configured for subtask \"" + subtask + "\"");
  return ref;
}

template <typename F>
std::optional<double> guarded(F&& f) {
  try {
    return f();
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace

AuditResult audit(const AuditInput& input, const AuditOptions& options) {
  if (input.candidates == nullptr) throw InputError("audit needs a candidate index");
  const CandidateIndex& index = *input.candidates;
  const bool pointwise = input.mode == ScoringMode::kPointwise;

  std::vector<CandidateRecord> qualified;
  for (const auto& c : index.records()) {
    if (c.qualified) qualified.push_back(c);
  }
  const CandidateIndex qualified_index(qualified);

  AuditResult result;
  if (!pointwise) result.notices.push_back("pairwise input: JSD and EMD are pointwise-only and were omitted");

  for (const auto& subtask : index.subtasks()) {
    const GroupId& ref = reference_for(options, subtask);
    const auto groups = index.groups(subtask);
    if (std::find(groups.begin(), groups.end(), ref) == groups.end()) {
      throw InputError("reference group \"" + ref + "\" not found in subtask \"" + subtask + "\"");
    }

    const auto all_samples = samples_by_group(input.tables, index, subtask, false);
    for (const auto& [group, s] : all_samples) {
      GroupSummary g{input.model_id, subtask, group, static_cast<int>(s.scores.size()), 0.0, std::nullopt};
      g.mean = std::accumulate(s.scores.begin(), s.scores.end(), 0.0) / static_cast<double>(s.scores.size());
      try {
        g.moments = dist_moments(s.scores);
      } catch (const DomainError&) {
      }
      result.groups.push_back(std::move(g));
    }

    for (const bool qualified_only : {false, true}) {
      const auto samples = qualified_only ? samples_by_group(input.tables, index, subtask, true) : all_samples;
      const auto sample_of = [&](const GroupId& g) -> const GroupScoreSample& {
        static const GroupScoreSample kEmpty;
        const auto it = samples.find(g);
        return it == samples.end() ? kEmpty : it->second;
      };
      for (const auto& group : groups) {
        if (group == ref) continue;
        const GroupScoreSample& a = sample_of(group);
        const GroupScoreSample& b = sample_of(ref);
        const auto row = [&](Metric m, std::optional<double> value) {
          result.records.push_back(BiasRecord{input.model_id, subtask, m, group, ref, qualified_only, value,
                                              std::nullopt, is_directional(m)});
          return &result.records.back();
        };

        BiasRecord* r = row(Metric::kRabbi, guarded([&] { return rabbi(a, b).value; }));
        if (r->value && options.p_values) r->p_value = rabbi_p_value(a, b);
        if (pointwise) {
          row(Metric::kDeltaPoint, guarded([&] { return delta_pointwise(a, b).value; }));
          row(Metric::kJsd, guarded([&] { return jsd(a, b, options.binning).value; }));
          row(Metric::kEmd, guarded([&] { return emd(a, b).value; }));
        } else {
          const CandidateIndex& idx = qualified_only ? qualified_index : index;
          row(Metric::kDeltaPair, guarded([&] {
                std::vector<PairwiseResponse> in_subtask;
                for (const auto& resp : input.responses) {
                  if (resp.subtask == subtask) in_subtask.push_back(resp);
                }
                return delta_pairwise(in_subtask, idx, group, ref).value;
              }));
        }
        if (!a.scores.empty() && !b.scores.empty()) continue;
        result.notices.push_back("subtask \"" + subtask + "\": " + (qualified_only ? "qualified " : "") +
                                 "sample of \"" + (a.scores.empty() ? group : ref) +
                                 "\" is empty; metrics marked undefined");
      }
    }
  }
  return result;
}

CsvTable bias_records_csv(std::span<const BiasRecord> records) {
  CsvTable csv{{"metric", "protected", "reference", "subtask", "model_id", "variant", "value", "p_value",
                "directional"},
               {}};
  for (const auto& r : records) {
    csv.rows.push_back({std::string(to_string(r.metric)), r.protected_group, r.reference, r.subtask, r.model_id,
                        r.qualified_only ? "qualified" : "all", r.value ? format_double(*r.value) : "NA",
                        r.p_value ? format_double(*r.p_value) : "", r.directional ? "1" : "0"});
  }
  return csv;
}

std::vector<BiasRecord> parse_bias_csv(const CsvTable& table) {
  const std::size_t c_metric = table.column("metric"), c_prot = table.column("protected"),
                    c_ref = table.column("reference"), c_subtask = table.column("subtask"),
                    c_model = table.column("model_id"), c_variant = table.column("variant"),
                    c_value = table.column("value"), c_p = table.column("p_value");
  std::vector<BiasRecord> out;
  for (const auto& row : table.rows) {
    const auto metric = parse_metric(row[c_metric]);
    if (!metric) throw InputError("unknown metric \"" + row[c_metric] + "\"");
    if (row[c_variant] != "all" && row[c_variant] != "qualified") {
      throw InputError("unknown variant \"" + row[c_variant] + "\"");
    }
    BiasRecord r{row[c_model], row[c_subtask], *metric, row[c_prot], row[c_ref], row[c_variant] == "qualified",
                 std::nullopt, std::nullopt, is_directional(*metric)};
    if (row[c_value] != "NA") r.value = parse_double(row[c_value]);
    if (!row[c_p].empty()) r.p_value = parse_double(row[c_p]);
    out.push_back(std::move(r));
  }
  return out;
}

CsvTable group_summary_csv(std::span<const GroupSummary> groups) {
  CsvTable csv{{"model_id", "subtask", "group", "n", "mean", "skewness", "excess_kurtosis"}, {}};
  for (const auto& g : groups) {
    csv.rows.push_back({g.model_id, g.subtask, g.group, std::to_string(g.n), format_double(g.mean),
                        g.moments ? format_double(g.moments->skewness) : "NA",
                        g.moments ? format_double(g.moments->excess_kurtosis) : "NA"});
  }
  return csv;
}

}  // namespace rabbi
