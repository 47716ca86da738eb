#include "rabbi/cli.h"

#include <CLI11.hpp>

#include <iostream>
#include <nlohmann/json.hpp>

#include "rabbi/commands.h"
#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi::cli {

namespace fs = std::filesystem;

namespace {

std::optional<fs::path> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return fs::path(argv[i + 1]);
    if (arg.substr(0, 9) == "--config=") return fs::path(std::string(arg.substr(9)));
  }
  return std::nullopt;
}

// "binary", "rating:LO:HI" or a JSON file.
LabelScale parse_scale(const std::string& text) {
  if (text == "binary") return LabelScale::binary();
  if (text.rfind("rating:", 0) == 0) {
    const auto colon = text.find(':', 7);
    if (colon == std::string::npos) throw InputError("rating scale must look like rating:LO:HI");
    return LabelScale::rating(static_cast<int>(parse_int(text.substr(7, colon - 7))),
                              static_cast<int>(parse_int(text.substr(colon + 1))));
  }
  return LabelScale::from_json(read_text_file(text));
}

struct Overrides {
  std::vector<std::string> reference_for;
  std::string scale;
  int eval_k = 0;
  ModelInputs model;
  ValidatePaths validate;
  std::vector<fs::path> bias_files;
  std::vector<fs::path> gap_files;
  std::string endpoint;
  std::string endpoint_model;
  std::string auth_env;
  int parallel = 0;
  fs::path contexts;
};

void apply(RunConfig& config, const Overrides& o) {
  for (const auto& spec : o.reference_for) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw InputError("--reference-for expects SUBTASK=GROUP, got \"" + spec + "\"");
    }
    config.references[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  if (!o.scale.empty()) config.scale = parse_scale(o.scale);
  if (o.eval_k > 0) config.eval_k = o.eval_k;
  const ModelInputs& m = o.model;
  if (!m.pointwise.empty() || !m.pairwise.empty()) {
    ModelInputs in = m;
    in.mode = m.pairwise.empty() ? ScoringMode::kPointwise : ScoringMode::kPairwise;
    config.models = {in};
  } else if (!config.models.empty() && (!m.pools.empty() || !m.model_id.empty())) {
    if (config.models.size() != 1) throw InputError("--pools/--model-id need a single model");
    if (!m.pools.empty()) config.models[0].pools = m.pools;
    if (!m.model_id.empty()) config.models[0].model_id = m.model_id;
  }
  if (!o.endpoint.empty()) config.endpoint.base_url = o.endpoint;
  if (!o.endpoint_model.empty()) config.endpoint.model = o.endpoint_model;
  if (!o.auth_env.empty()) config.endpoint.auth_env = o.auth_env;
  if (o.parallel > 0) config.endpoint.parallel = o.parallel;
  if (!o.contexts.empty()) {
    config.collect.contexts =
        nlohmann::json::parse(read_text_file(o.contexts)).get<std::map<std::string, std::string>>();
  }
}

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--model-id", o.model.model_id, "Model identifier used in reports");
  cmd->add_option("--pointwise", o.model.pointwise, "Pointwise predictions (JSONL)");
  cmd->add_option("--pairwise", o.model.pairwise, "Pairwise responses (JSONL)");
  cmd->add_option("--candidates", o.model.candidates, "Candidate records (JSONL)");
  cmd->add_option("--pools", o.model.pools, "Pool specs (JSONL)");
  cmd->add_option("--scale", o.scale, "Label scale: binary, rating:LO:HI or a JSON file");
}

void add_simulation_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--rounds", c.rounds, "Simulation rounds per subtask");
  cmd->add_option("--quotas", c.quotas, "Allocation quotas")->delimiter(',');
  cmd->add_option("--pool-mode", c.pool_mode, "one_per_group or sample_m");
  cmd->add_option("--pool-size", c.pool_size, "Pool size for sample_m");
}

}  // namespace

int run(int argc, char** argv) {
  try {
    RunConfig config;
    if (const auto path = find_config(argc, argv)) config = RunConfig::load(*path);

    CLI::App app{"Rank-based allocational bias audit for LLM scoring"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Overrides o;
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", config.seed, "Master seed");
    app.add_option("--out,-o", config.output_dir, "Output directory");
    app.add_option("--jobs,-j", config.jobs, "Worker threads");
    app.add_option("--formats", config.formats, "Report formats (csv,json)")->delimiter(',');
    app.add_option("--reference", config.default_reference, "Reference group for every subtask");
    app.add_option("--reference-for", o.reference_for, "SUBTASK=GROUP reference override");

    auto* validate = app.add_subcommand("validate", "Check a dataset and write validation.json")->fallthrough();
    validate->add_option("--pointwise", o.validate.pointwise, "Pointwise predictions (JSONL)");
    validate->add_option("--candidates", o.validate.candidates, "Candidate records (JSONL)");
    validate->add_option("--pairwise", o.validate.pairwise, "Pairwise responses (JSONL)");
    validate->add_option("--pools", o.validate.pools, "Pool specs (JSONL)");
    validate->add_option("--scale", o.scale, "Label scale: binary, rating:LO:HI or a JSON file");

    auto* synth = app.add_subcommand("synth", "Generate synthetic score datasets")->fallthrough();
    synth->add_option("--regime", config.synth.regime, "resume or essay");
    synth->add_option("--models", config.synth.models, "Number of synthetic models");
    synth->add_flag("--adversarial", config.synth.adversarial, "Generate the adversarial case");
    synth->add_option("--spec", config.synth.spec, "Single model spec (JSON)");

    auto* collect = app.add_subcommand("collect", "Query a chat endpoint for predictions")->fallthrough();
    collect->add_option("--endpoint", o.endpoint, "Endpoint base URL");
    collect->add_option("--model", o.endpoint_model, "Model name sent to the endpoint");
    collect->add_option("--mode", config.collect.mode, "point or pair");
    collect->add_option("--template", config.collect.template_id, "Built-in template id or template file");
    collect->add_option("--parallel", o.parallel, "Concurrent requests");
    collect->add_option("--cache-dir", config.collect.cache_dir, "Response cache directory");
    collect->add_option("--fail-threshold", config.collect.fail_threshold, "Maximum transport failure rate");
    collect->add_option("--items", config.collect.items, "Items to score (JSONL)");
    collect->add_option("--pools", config.collect.pools, "Pools for pairwise collection (JSONL)");
    collect->add_option("--contexts", o.contexts, "JSON map of subtask to context text");
    collect->add_option("--auth-env", o.auth_env, "Environment variable holding the API token");
    collect->add_option("--scale", o.scale, "Label scale: binary, rating:LO:HI or a JSON file");

    auto* score = app.add_subcommand("score", "Derive per-candidate scores")->fallthrough();
    add_model_flags(score, o);

    auto* audit_cmd = app.add_subcommand("audit", "Compute bias metrics")->fallthrough();
    add_model_flags(audit_cmd, o);
    audit_cmd->add_option("--bins", config.binning.bins, "Histogram bins for JSD");

    auto* simulate = app.add_subcommand("simulate", "Simulate top-k allocation")->fallthrough();
    add_model_flags(simulate, o);
    add_simulation_flags(simulate, config);

    auto* evaluate = app.add_subcommand("evaluate", "Correlate bias metrics with allocation gaps")->fallthrough();
    evaluate->add_option("--bias", o.bias_files, "bias.csv files")->required();
    evaluate->add_option("--gaps", o.gap_files, "gaps.csv files")->required();
    evaluate->add_option("--k", o.eval_k, "Quota used for the overall correlations");

    auto* pipeline = app.add_subcommand("pipeline", "Score, audit, simulate and evaluate")->fallthrough();
    add_model_flags(pipeline, o);
    add_simulation_flags(pipeline, config);
    pipeline->add_option("--k", o.eval_k, "Quota used for the overall correlations");
    pipeline->add_option("--regime", config.synth.regime, "Synthetic regime when no models are given");
    pipeline->add_option("--models", config.synth.models, "Synthetic model count when no models are given");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? kOk : kInputError;
    }

    apply(config, o);
    if (validate->parsed() && !o.scale.empty()) config.scale = parse_scale(o.scale);
    config.validate();

    if (validate->parsed()) return cmd_validate(config, o.validate);
    if (synth->parsed()) return cmd_synth(config);
    if (collect->parsed()) {
      config.endpoint.validate();
      return cmd_collect(config);
    }
    if (score->parsed()) return cmd_score(config);
    if (audit_cmd->parsed()) return cmd_audit(config);
    if (simulate->parsed()) return cmd_simulate(config);
    if (evaluate->parsed()) return cmd_evaluate(config, o.bias_files, o.gap_files);
    if (pipeline->parsed()) return cmd_pipeline(config);
    return kInputError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace rabbi::cli
