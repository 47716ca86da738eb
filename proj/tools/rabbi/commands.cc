#include "rabbi/commands.h"

#include <charconv>
#include <cstdio>
#include <iostream>

#include <nlohmann/json.hpp>

#include "rabbi/error.h"
#include "rabbi/model_client.h"
#include "rabbi/random.h"
#include "rabbi/synthetic_bench.h"
#include "rabbi/validity_eval.h"

namespace rabbi::cli {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

ModelData load_model(const ModelInputs& inputs, const std::optional<LabelScale>& scale) {
  ModelData m;
  m.model_id = inputs.model_id.empty() ? "model" : inputs.model_id;
  m.mode = inputs.mode;
  const auto require = [&](const fs::path& p, const char* what) {
    if (p.empty()) throw InputError("model \"" + m.model_id + "\": missing " + what + " file");
    m.files.push_back(p);
  };
  if (inputs.mode == ScoringMode::kPointwise) {
    require(inputs.pointwise, "pointwise");
    auto data = load_pointwise(inputs.pointwise, scale);
    m.records = std::move(data.records);
    m.warnings = std::move(data.warnings);
    m.candidates = candidates_of(m.records);
    m.tables = pointwise_score_tables(m.records, scale);
  } else {
    require(inputs.candidates, "candidates");
    require(inputs.pairwise, "pairwise");
    m.candidates = load_candidates(inputs.candidates);
    auto data = load_pairwise(inputs.pairwise);
    m.responses = std::move(data.responses);
    m.warnings = std::move(data.warnings);
    m.tables = pairwise_score_tables(m.responses);
  }
  if (!inputs.pools.empty()) {
    m.files.push_back(inputs.pools);
    m.pools = load_pools(inputs.pools);
  }
  m.index = CandidateIndex(m.candidates);
  return m;
}

Provenance make_provenance(const RunConfig& config, std::string_view command, const std::vector<fs::path>& inputs) {
  Provenance p;
  p.config_hash = config.hash(command);
  p.seed = config.seed;
  for (const auto& f : inputs) {
    const auto parent = f.parent_path().filename();
    const std::string name = parent.empty() ? f.filename().string() : (parent / f.filename()).generic_string();
    p.inputs.emplace_back(name, file_sha256(f));
  }
  return p;
}

namespace {

ordered_json provenance_json(const Provenance& p) {
  ordered_json j{{"tool_version", p.tool_version}, {"config_hash", p.config_hash}, {"seed", p.seed}};
  j["inputs"] = ordered_json::array();
  for (const auto& [name, digest] : p.inputs) j["inputs"].push_back({{"name", name}, {"sha256", digest}});
  return j;
}

ordered_json typed(const std::string& field) {
  if (field == "NA") return nullptr;
  if (field.empty()) return field;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec == std::errc() && ptr == field.data() + field.size()) return v;
  return field;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

GroupId reference_for(const RunConfig& config, const std::string& subtask) {
  const auto it = config.references.find(subtask);
  const GroupId ref = it == config.references.end() ? config.default_reference : it->second;
  if (ref.empty()) throw InputError("no reference group for subtask \"" + subtask + "\" (use --reference)");
  return ref;
}

}  // namespace

void write_report(const RunConfig& config, const fs::path& dir, const std::string& name, const CsvTable& table,
                  const Provenance& provenance) {
  if (config.wants("csv")) write_csv(dir / (name + ".csv"), table, &provenance);
  if (config.wants("json")) {
    ordered_json j{{"provenance", provenance_json(provenance)}};
    j["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
      ordered_json obj;
      for (std::size_t i = 0; i < table.header.size(); ++i) obj[table.header[i]] = typed(row[i]);
      j["rows"].push_back(std::move(obj));
    }
    write_json(dir / (name + ".json"), j);
  }
}

AuditOptions audit_options(const RunConfig& config) {
  AuditOptions o;
  o.reference_by_subtask = config.references;
  o.default_reference = config.default_reference;
  o.binning = config.binning;
  return o;
}

int cmd_validate(const RunConfig& config, const ValidatePaths& paths) {
  std::vector<CandidateRecord> candidates;
  std::vector<PoolSpec> pools;
  std::vector<PairwiseResponse> responses;
  std::vector<fs::path> inputs;
  ValidationSummary summary;
  try {
    if (!paths.pointwise.empty()) {
      inputs.push_back(paths.pointwise);
      auto data = load_pointwise(paths.pointwise, config.scale);
      candidates = candidates_of(data.records);
      for (auto& w : data.warnings) summary.issues.push_back({ValidationIssue::Severity::kWarning, "skipped", w});
    } else if (!paths.candidates.empty()) {
      inputs.push_back(paths.candidates);
      candidates = load_candidates(paths.candidates);
    } else {
      throw InputError("validate needs --pointwise or --candidates");
    }
    if (!paths.pools.empty()) {
      inputs.push_back(paths.pools);
      pools = load_pools(paths.pools);
    }
    if (!paths.pairwise.empty()) {
      inputs.push_back(paths.pairwise);
      responses = load_pairwise(paths.pairwise).responses;
    }
    auto checked = validate_dataset(candidates, pools, responses);
    checked.issues.insert(checked.issues.begin(), summary.issues.begin(), summary.issues.end());
    summary = std::move(checked);
  } catch (const InputError& e) {
    summary.issues.push_back({ValidationIssue::Severity::kError, "load_error", e.what()});
  }

  std::vector<fs::path> existing;
  for (const auto& f : inputs) {
    if (fs::exists(f)) existing.push_back(f);
  }
  auto j = nlohmann::ordered_json::parse(summary.to_json());
  j["provenance"] = provenance_json(make_provenance(config, "validate", existing));
  write_json(config.output_dir / "validation.json", j);
  for (const auto& issue : summary.issues) {
    std::cerr << (issue.severity == ValidationIssue::Severity::kError ? "error" : "warning") << " [" << issue.code
              << "] " << issue.message << "\n";
  }
  std::cout << summary.error_count() << " errors, " << summary.warning_count() << " warnings\n";
  return summary.ok() ? kOk : kInputError;
}

std::vector<ModelInputs> run_synth(const RunConfig& config, const fs::path& dir, GroupId* reference) {
  std::vector<SyntheticModelSpec> specs;
  std::optional<AdversarialCase> adversarial;
  if (!config.synth.spec.empty()) {
    specs.push_back(SyntheticModelSpec::from_json(read_text_file(config.synth.spec)));
  } else if (config.synth.adversarial) {
    adversarial = gen_adversarial_case(config.seed);
    specs.push_back(adversarial->spec);
  } else {
    const auto regime = parse_regime(config.synth.regime);
    if (!regime) throw InputError("unknown regime \"" + config.synth.regime + "\" (resume or essay)");
    specs = gen_benchmark(*regime, config.synth.models, config.seed);
  }

  std::vector<ModelInputs> models;
  for (const auto& spec : specs) {
    const SyntheticDataset data = gen_scores(spec);
    const fs::path model_dir = dir / spec.model_id;
    write_pointwise(model_dir / "pointwise.jsonl", data.records);
    write_text_file(model_dir / "spec.json", spec.to_json());
    models.push_back(ModelInputs{spec.model_id, ScoringMode::kPointwise, model_dir / "pointwise.jsonl", {}, {}, {}});
    if (reference && reference->empty()) *reference = spec.reference_group;
  }
  if (adversarial) {
    const auto& c = adversarial->check;
    const ordered_json j{{"delta", c.delta},       {"dp_gap", c.dp_gap},  {"rabbi", c.rabbi},
                         {"passes", c.passes},     {"attempts", adversarial->attempts},
                         {"rounds", 2000},         {"k", 1}};
    write_json(dir / adversarial->spec.model_id / "check.json", j);
  }
  return models;
}

int cmd_synth(const RunConfig& config) {
  GroupId reference;
  const auto models = run_synth(config, config.output_dir, &reference);
  ordered_json j{{"seed", config.seed}, {"reference", reference}};
  j["models"] = ordered_json::array();
  for (const auto& m : models) {
    j["models"].push_back({{"model_id", m.model_id},
                           {"mode", "pointwise"},
                           {"pointwise", fs::relative(m.pointwise, config.output_dir).generic_string()}});
  }
  write_json(config.output_dir / "models.json", j);
  std::cout << "wrote " << models.size() << " synthetic model(s) to " << config.output_dir.string() << "\n";
  return kOk;
}

int cmd_collect(const RunConfig& config) {
  const CollectConfig& cc = config.collect;
  if (cc.mode != "point" && cc.mode != "pair") throw InputError("--mode must be point or pair");
  if (cc.items.empty()) throw InputError("collect needs --items");
  if (cc.template_id.empty()) throw InputError("collect needs --template");

  CollectOptions options;
  options.mode = cc.mode == "point" ? ScoringMode::kPointwise : ScoringMode::kPairwise;
  options.tmpl = fs::exists(cc.template_id) ? PromptTemplate::from_json(read_text_file(cc.template_id))
                                            : builtin_template(cc.template_id);
  options.contexts = cc.contexts;
  options.out_dir = config.output_dir;
  options.scale = config.scale;
  if (options.mode == ScoringMode::kPointwise && !options.scale) {
    if (options.tmpl.id == "resume_point") options.scale = LabelScale::binary();
    else if (options.tmpl.id == "essay_point") options.scale = LabelScale::rating(1, 5);
    else throw InputError("pointwise collection with a custom template needs a label scale");
  }

  const auto items = load_collection_items(cc.items);
  std::vector<PoolSpec> pools;
  if (options.mode == ScoringMode::kPairwise) {
    if (cc.pools.empty()) throw InputError("pairwise collection needs --pools");
    pools = load_pools(cc.pools);
  }

  std::optional<fs::path> cache;
  if (!cc.cache_dir.empty()) cache = cc.cache_dir;
  ChatClient client(config.endpoint, make_http_transport(config.endpoint.base_url, config.endpoint.timeout), cache);
  const CollectSummary summary = collect_run(items, pools, client, options);
  std::cerr << summary.to_json();
  if (summary.failure_rate() > cc.fail_threshold) {
    std::cerr << "failure rate " << summary.failure_rate() << " exceeds threshold " << cc.fail_threshold << "\n";
    return kCollectionFailure;
  }
  return kOk;
}

void run_score(const RunConfig& config, const ModelData& model, const fs::path& dir) {
  const Provenance prov = make_provenance(config, "score", model.files);
  write_report(config, dir, "scores", score_tables_csv(model.tables, model.index), prov);
  if (model.mode == ScoringMode::kPairwise) {
    const auto s = pairwise_consistency_stats(model.responses);
    CsvTable t{{"model_id", "pairs", "regular_pct", "flipped_pct", "tie_pct", "invalid_pct"}, {}};
    t.rows.push_back({model.model_id, std::to_string(s.pairs), format_double(s.regular_pct),
                      format_double(s.flipped_pct), format_double(s.tie_pct), format_double(s.invalid_pct)});
    write_report(config, dir, "consistency", t, prov);
  }
}

std::vector<BiasRecord> run_audit(const RunConfig& config, const ModelData& model, const fs::path& dir) {
  const AuditInput input{model.model_id, &model.index, model.mode, model.tables, model.responses};
  const AuditResult result = audit(input, audit_options(config));
  for (const auto& n : result.notices) std::cerr << "notice: " << n << "\n";

  const Provenance prov = make_provenance(config, "audit", model.files);
  if (config.wants("csv")) write_csv(dir / "bias.csv", bias_records_csv(result.records), &prov);
  if (config.wants("json")) {
    ordered_json j{{"provenance", provenance_json(prov)}, {"model_id", model.model_id}};
    ordered_json& subtasks = j["subtasks"];
    for (const auto& r : result.records) {
      ordered_json& s = subtasks[r.subtask];
      s["reference"] = r.reference;
      ordered_json& cell = s["groups"][r.protected_group][r.qualified_only ? "qualified" : "all"]
                            [std::string(to_string(r.metric))];
      cell["value"] = r.value ? ordered_json(*r.value) : ordered_json();
      if (r.p_value) cell["p_value"] = *r.p_value;
      cell["directional"] = r.directional;
    }
    j["notices"] = result.notices;
    write_json(dir / "bias.json", j);
  }
  write_report(config, dir, "groups", group_summary_csv(result.groups), prov);
  return result.records;
}

std::vector<GapRecord> run_simulate(const RunConfig& config, const ModelData& model, const fs::path& dir) {
  std::vector<PoolSpec> pools;
  if (model.mode == ScoringMode::kPointwise) {
    const int max_k = *std::max_element(config.quotas.begin(), config.quotas.end());
    const RoundPlan plan{*parse_pool_mode(config.pool_mode), config.rounds, config.pool_size, max_k,
                         derive_seed(config.seed, fnv1a64("pools"))};
    pools = build_rounds(model.candidates, plan);
  } else {
    if (model.pools.empty()) throw InputError("model \"" + model.model_id + "\": pairwise simulation needs --pools");
    pools = model.pools;
  }
  std::map<std::string, int> rounds_per_subtask;
  for (const auto& p : pools) ++rounds_per_subtask[p.subtask];

  const ScoreSource source(model.tables);
  const std::uint64_t selection_seed = derive_seed(config.seed, fnv1a64("selection"));
  std::vector<GapRecord> gaps;
  CsvTable rates{{"subtask", "model_id", "group", "k", "appearances", "selected", "rate", "qualified_appearances",
                  "qualified_selected", "qualified_rate"},
                 {}};
  const Provenance prov = make_provenance(config, "simulate", model.files);
  for (const int k : config.quotas) {
    const auto outcomes = run_selection(pools, source, selection_seed, k, config.jobs);
    write_report(config, dir, "outcomes_k" + std::to_string(k), outcomes_csv(outcomes, model.index), prov);
    for (const auto& [subtask, rounds] : rounds_per_subtask) {
      std::vector<SelectionOutcome> in_subtask;
      for (const auto& o : outcomes) {
        if (o.subtask == subtask) in_subtask.push_back(o);
      }
      const auto stats = group_stats(in_subtask, model.index);
      const auto rows = gap_records(stats, reference_for(config, subtask), subtask, model.model_id, k, rounds);
      gaps.insert(gaps.end(), rows.begin(), rows.end());
      for (const auto& [group, s] : stats) {
        const auto ratio = [](std::int64_t a, std::int64_t b) {
          return b ? format_double(static_cast<double>(a) / static_cast<double>(b)) : std::string("NA");
        };
        rates.rows.push_back({subtask, model.model_id, group, std::to_string(k), std::to_string(s.total),
                              std::to_string(s.selected), ratio(s.selected, s.total),
                              std::to_string(s.qualified_total), std::to_string(s.qualified_selected),
                              ratio(s.qualified_selected, s.qualified_total)});
      }
    }
  }
  write_report(config, dir, "gaps", gaps_csv(gaps), prov);
  write_report(config, dir, "selection_rates", rates, prov);
  return gaps;
}

void run_evaluate(const RunConfig& config, const std::vector<BiasRecord>& bias, const std::vector<GapRecord>& gaps,
                  const std::vector<fs::path>& inputs, const fs::path& dir) {
  PairingRules rules;
  rules.k = config.eval_k;
  const ValidityReport report = correlation_report(bias, gaps, rules);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";

  const Provenance prov = make_provenance(config, "evaluate", inputs);
  write_report(config, dir, "correlations", correlations_csv(report.correlations, "overall"), prov);
  write_report(config, dir, "correlations_by_group", correlations_csv(report.correlations, "group"), prov);
  write_report(config, dir, "correlations_by_k", correlations_csv(report.correlations, "k"), prov);
  write_report(config, dir, "rankings", rankings_csv(report.rankings), prov);
  write_report(config, dir, "ndcg", ndcg_csv(report.ndcg), prov);
  if (config.wants("csv")) write_csv(dir / "plot_data.csv", plot_data_csv(report.pairs), &prov);
  if (config.wants("json")) {
    auto j = ordered_json::parse(validity_report_json(report));
    ordered_json out{{"provenance", provenance_json(prov)}};
    for (auto& [key, value] : j.items()) out[key] = value;
    write_json(dir / "validity.json", out);
  }
}

namespace {

fs::path model_dir(const RunConfig& config, const std::string& model_id) {
  return config.models.size() == 1 ? config.output_dir : config.output_dir / model_id;
}

template <typename F>
int for_each_model(const RunConfig& config, F&& step) {
  if (config.models.empty()) throw InputError("no model inputs given");
  for (const auto& inputs : config.models) {
    const ModelData model = load_model(inputs, config.scale);
    for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
    step(model, model_dir(config, model.model_id));
  }
  return kOk;
}

}  // namespace

int cmd_score(const RunConfig& config) {
  return for_each_model(config, [&](const ModelData& m, const fs::path& dir) { run_score(config, m, dir); });
}

int cmd_audit(const RunConfig& config) {
  return for_each_model(config, [&](const ModelData& m, const fs::path& dir) { run_audit(config, m, dir); });
}

int cmd_simulate(const RunConfig& config) {
  return for_each_model(config, [&](const ModelData& m, const fs::path& dir) { run_simulate(config, m, dir); });
}

int cmd_evaluate(const RunConfig& config, const std::vector<fs::path>& bias_files,
                 const std::vector<fs::path>& gap_files) {
  if (bias_files.empty() || gap_files.empty()) throw InputError("evaluate needs --bias and --gaps files");
  std::vector<BiasRecord> bias;
  std::vector<GapRecord> gaps;
  for (const auto& f : bias_files) {
    const auto rows = parse_bias_csv(read_csv(f));
    bias.insert(bias.end(), rows.begin(), rows.end());
  }
  for (const auto& f : gap_files) {
    const auto rows = parse_gaps_csv(read_csv(f));
    gaps.insert(gaps.end(), rows.begin(), rows.end());
  }
  std::vector<fs::path> inputs = bias_files;
  inputs.insert(inputs.end(), gap_files.begin(), gap_files.end());
  run_evaluate(config, bias, gaps, inputs, config.output_dir);
  return kOk;
}

int cmd_pipeline(const RunConfig& base) {
  RunConfig config = base;
  if (config.models.empty()) {
    config.models = run_synth(config, config.output_dir / "data", &config.default_reference);
  }
  std::vector<BiasRecord> bias;
  std::vector<GapRecord> gaps;
  std::vector<fs::path> inputs;
  for (const auto& in : config.models) {
    const ModelData model = load_model(in, config.scale);
    for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
    const fs::path dir = config.output_dir / "models" / model.model_id;
    run_score(config, model, dir);
    const auto b = run_audit(config, model, dir);
    const auto g = run_simulate(config, model, dir);
    bias.insert(bias.end(), b.begin(), b.end());
    gaps.insert(gaps.end(), g.begin(), g.end());
    inputs.insert(inputs.end(), model.files.begin(), model.files.end());
  }
  const Provenance prov = make_provenance(config, "pipeline", inputs);
  write_report(config, config.output_dir, "bias", bias_records_csv(bias), prov);
  write_report(config, config.output_dir, "gaps", gaps_csv(gaps), prov);
  run_evaluate(config, bias, gaps, inputs, config.output_dir / "validity");
  std::cout << "pipeline: " << config.models.size() << " model(s), reports in " << config.output_dir.string()
            << "\n";
  return kOk;
}

}  // namespace rabbi::cli
