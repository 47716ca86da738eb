#include "rabbi/allocation_sim.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

#include "rabbi/error.h"
#include "rabbi/random.h"
#include "rabbi/report.h"

namespace rabbi {

std::string_view to_string(PoolMode mode) {
  return mode == PoolMode::kOnePerGroup ? "one_per_group" : "sample_m";
}

std::optional<PoolMode> parse_pool_mode(std::string_view name) {
  if (name == "one_per_group" || name == "ONE_PER_GROUP") return PoolMode::kOnePerGroup;
  if (name == "sample_m" || name == "SAMPLE_M") return PoolMode::kSampleM;
  return std::nullopt;
}

namespace {

std::string round_id(std::string_view subtask, int round) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#r%06d", round);
  return std::string(subtask) + buf;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

std::vector<PoolSpec> build_rounds(std::span<const CandidateRecord> candidates, const RoundPlan& plan) {
  if (plan.rounds < 1) throw InputError("rounds must be >= 1");
  if (plan.k < 1) throw InputError("quota k must be >= 1");
  const CandidateIndex index(candidates);

  std::vector<PoolSpec> pools;
  for (const auto& subtask : index.subtasks()) {
    const auto records = index.records(subtask);  // sorted by id
    std::map<GroupId, std::vector<std::string>> by_group;
    std::vector<std::string> all;
    for (const auto& r : records) {
      by_group[r.group].push_back(r.candidate_id);
      all.push_back(r.candidate_id);
    }
    const std::size_t n = plan.mode == PoolMode::kOnePerGroup ? by_group.size() : static_cast<std::size_t>(plan.m);
    if (plan.mode == PoolMode::kSampleM && (plan.m < 2 || n > all.size())) {
      throw InputError("subtask \"" + subtask + "\": cannot sample " + std::to_string(plan.m) + " of " +
                       std::to_string(all.size()) + " candidates");
    }
    if (static_cast<std::size_t>(plan.k) >= n) {
      throw InputError("subtask \"" + subtask + "\": quota k=" + std::to_string(plan.k) +
                       " must be below pool size " + std::to_string(n));
    }

    const std::uint64_t subtask_seed = derive_seed(plan.seed, fnv1a64(subtask));
    for (int r = 0; r < plan.rounds; ++r) {
      std::mt19937_64 rng(derive_seed(subtask_seed, static_cast<std::uint64_t>(r)));
      PoolSpec pool{round_id(subtask, r), subtask, {}, plan.k};
      if (plan.mode == PoolMode::kOnePerGroup) {
        for (const auto& [group, ids] : by_group) pool.members.push_back(ids[uniform_index(rng, ids.size())]);
      } else {
        // Partial Fisher-Yates.
        std::vector<std::string> bag = all;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = i + uniform_index(rng, bag.size() - i);
          std::swap(bag[i], bag[j]);
          pool.members.push_back(bag[i]);
        }
      }
      pools.push_back(std::move(pool));
    }
  }
  return pools;
}

SelectionOutcome select_top_k(const PoolSpec& pool, const ScoreTable& scores, std::uint64_t seed,
                              std::optional<int> k) {
  const int quota = k.value_or(pool.k);
  if (quota < 1 || static_cast<std::size_t>(quota) > pool.size()) {
    throw InputError("pool " + pool.pool_id + ": quota " + std::to_string(quota) + " outside [1, " +
                     std::to_string(pool.size()) + "]");
  }
  struct Entry {
    const std::string* id;
    double score;
  };
  std::vector<Entry> entries;
  entries.reserve(pool.size());
  for (const auto& m : pool.members) {
    const auto s = scores.find(m);
    if (!s) throw InputError("pool " + pool.pool_id + ": no score for candidate \"" + m + "\"");
    entries.push_back({&m, *s});
  }

  SelectionOutcome out;
  out.pool_id = pool.pool_id;
  out.subtask = pool.subtask;
  out.k = quota;
  out.tie_break_seed = derive_seed(seed, fnv1a64(pool.pool_id));
  std::mt19937_64 rng(out.tie_break_seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });

  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.ranking.push_back(*entries[i].id);
    out.scores.push_back(entries[i].score);
    if (i < static_cast<std::size_t>(quota)) out.selected.insert(*entries[i].id);
  }
  return out;
}

ScoreSource::ScoreSource(std::vector<ScoreTable> tables) : tables_(std::move(tables)) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    const auto& t = tables_[i];
    const bool fresh = t.mode == ScoringMode::kPointwise ? pointwise_.emplace(t.subtask, i).second
                                                         : pairwise_.emplace(std::pair(t.subtask, t.pool_id), i).second;
    if (!fresh) throw InputError("duplicate score table for subtask \"" + t.subtask + "\" pool \"" + t.pool_id + "\"");
  }
}

const ScoreTable& ScoreSource::table_for(const PoolSpec& pool) const {
  if (const auto it = pairwise_.find({pool.subtask, pool.pool_id}); it != pairwise_.end()) return tables_[it->second];
  if (const auto it = pointwise_.find(pool.subtask); it != pointwise_.end()) return tables_[it->second];
  throw InputError("no scores for pool " + pool.pool_id + " (subtask \"" + pool.subtask + "\")");
}

std::vector<SelectionOutcome> run_selection(std::span<const PoolSpec> pools, const ScoreSource& scores,
                                            std::uint64_t seed, std::optional<int> k, int jobs) {
  std::vector<SelectionOutcome> out(pools.size());
  const auto work = [&](std::size_t i) { out[i] = select_top_k(pools[i], scores.table_for(pools[i]), seed, k); };
  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), pools.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < pools.size(); ++i) work(i);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < pools.size() && !failed; i = next++) {
          try {
            work(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::map<GroupId, GroupSelectionStats> group_stats(std::span<const SelectionOutcome> outcomes,
                                                   const CandidateIndex& candidates) {
  std::map<GroupId, GroupSelectionStats> stats;
  for (const auto& o : outcomes) {
    for (const auto& id : o.ranking) {
      const CandidateRecord& c = candidates.at(o.subtask, id);
      auto& s = stats[c.group];
      s.group = c.group;
      const bool chosen = o.selected.contains(id);
      ++s.total;
      s.selected += chosen;
      if (c.qualified) {
        ++s.qualified_total;
        s.qualified_selected += chosen;
      }
    }
  }
  return stats;
}

namespace {

const GroupSelectionStats& stats_of(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& g) {
  const auto it = stats.find(g);
  if (it == stats.end() || it->second.total == 0) throw DomainError("group \"" + g + "\" never appeared in a pool");
  return it->second;
}

}  // namespace

double dp_gap(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& a, const GroupId& b) {
  const auto& sa = stats_of(stats, a);
  const auto& sb = stats_of(stats, b);
  return static_cast<double>(sa.selected) / static_cast<double>(sa.total) -
         static_cast<double>(sb.selected) / static_cast<double>(sb.total);
}

double eo_gap(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& a, const GroupId& b) {
  const auto& sa = stats_of(stats, a);
  const auto& sb = stats_of(stats, b);
  for (const auto* s : {&sa, &sb}) {
    if (s->qualified_total == 0) throw DomainError("group \"" + s->group + "\" has no qualified appearances");
  }
  return static_cast<double>(sa.qualified_selected) / static_cast<double>(sa.qualified_total) -
         static_cast<double>(sb.qualified_selected) / static_cast<double>(sb.qualified_total);
}

std::string_view to_string(GapKind kind) { return kind == GapKind::kDp ? "DP" : "EO"; }

std::optional<GapKind> parse_gap_kind(std::string_view name) {
  if (name == "DP") return GapKind::kDp;
  if (name == "EO") return GapKind::kEo;
  return std::nullopt;
}

std::vector<GapRecord> gap_records(const std::map<GroupId, GroupSelectionStats>& stats, const GroupId& reference,
                                   std::string_view subtask, std::string_view model_id, int k, int rounds) {
  if (!stats.contains(reference)) throw InputError("reference group \"" + reference + "\" not found");
  std::vector<GapRecord> out;
  for (const auto& [group, s] : stats) {
    if (group == reference) continue;
    for (const GapKind kind : {GapKind::kDp, GapKind::kEo}) {
      GapRecord g{std::string(subtask), std::string(model_id), kind, group, reference, k, std::nullopt, rounds};
      try {
        g.value = kind == GapKind::kDp ? dp_gap(stats, group, reference) : eo_gap(stats, group, reference);
      } catch (const DomainError&) {
        g.value.reset();
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

CsvTable outcomes_csv(std::span<const SelectionOutcome> outcomes, const CandidateIndex& candidates) {
  CsvTable csv{{"pool_id", "rank", "candidate_id", "group", "score", "selected"}, {}};
  for (const auto& o : outcomes) {
    for (std::size_t i = 0; i < o.ranking.size(); ++i) {
      const auto* c = candidates.find(o.subtask, o.ranking[i]);
      csv.rows.push_back({o.pool_id, std::to_string(i + 1), o.ranking[i], c ? c->group : std::string(),
                          format_double(o.scores[i]), o.selected.contains(o.ranking[i]) ? "1" : "0"});
    }
  }
  return csv;
}

CsvTable gaps_csv(std::span<const GapRecord> gaps) {
  CsvTable csv{{"subtask", "model_id", "metric", "group_a", "group_b", "k", "value", "rounds"}, {}};
  for (const auto& g : gaps) {
    csv.rows.push_back({g.subtask, g.model_id, std::string(to_string(g.kind)), g.group_a, g.group_b,
                        std::to_string(g.k), g.value ? format_double(*g.value) : "NA", std::to_string(g.rounds)});
  }
  return csv;
}

std::vector<GapRecord> parse_gaps_csv(const CsvTable& table) {
  const std::size_t c_subtask = table.column("subtask"), c_model = table.column("model_id"),
                    c_metric = table.column("metric"), c_a = table.column("group_a"), c_b = table.column("group_b"),
                    c_k = table.column("k"), c_value = table.column("value"), c_rounds = table.column("rounds");
  std::vector<GapRecord> out;
  for (const auto& row : table.rows) {
    const auto kind = parse_gap_kind(row[c_metric]);
    if (!kind) throw InputError("unknown gap metric \"" + row[c_metric] + "\"");
    GapRecord g{row[c_subtask], row[c_model], *kind, row[c_a], row[c_b],
                static_cast<int>(parse_int(row[c_k])), std::nullopt, static_cast<int>(parse_int(row[c_rounds]))};
    if (row[c_value] != "NA") g.value = parse_double(row[c_value]);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace rabbi
