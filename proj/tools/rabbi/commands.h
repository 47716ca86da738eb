#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rabbi/allocation_sim.h"
#include "rabbi/audit.h"
#include "rabbi/data_model.h"
#include "rabbi/report.h"
#include "rabbi/run_config.h"
#include "rabbi/scoring.h"

namespace rabbi::cli {

enum ExitCode { kOk = 0, kInputError = 1, kCollectionFailure = 2, kInternalError = 3 };

// Everything loaded for one model.
struct ModelData {
  std::string model_id;
  ScoringMode mode = ScoringMode::kPointwise;
  std::vector<CandidateRecord> candidates;
  CandidateIndex index;
  std::vector<PointwiseRecord> records;
  std::vector<PairwiseResponse> responses;
  std::vector<PoolSpec> pools;
  std::vector<ScoreTable> tables;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

ModelData load_model(const ModelInputs& inputs, const std::optional<LabelScale>& scale);

// Writes name.csv and/or name.json under dir per the configured formats.
void write_report(const RunConfig& config, const std::filesystem::path& dir, const std::string& name,
                  const CsvTable& table, const Provenance& provenance);

Provenance make_provenance(const RunConfig& config, std::string_view command,
                           const std::vector<std::filesystem::path>& inputs);

AuditOptions audit_options(const RunConfig& config);

struct ValidatePaths {
  std::filesystem::path pointwise;
  std::filesystem::path candidates;
  std::filesystem::path pairwise;
  std::filesystem::path pools;
};

int cmd_validate(const RunConfig& config, const ValidatePaths& paths);
int cmd_synth(const RunConfig& config);
int cmd_collect(const RunConfig& config);
int cmd_score(const RunConfig& config);
int cmd_audit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_evaluate(const RunConfig& config, const std::vector<std::filesystem::path>& bias_files,
                 const std::vector<std::filesystem::path>& gap_files);
int cmd_pipeline(const RunConfig& config);

// Building blocks shared by the per-step commands and the pipeline.
void run_score(const RunConfig& config, const ModelData& model, const std::filesystem::path& dir);
std::vector<BiasRecord> run_audit(const RunConfig& config, const ModelData& model, const std::filesystem::path& dir);
std::vector<GapRecord> run_simulate(const RunConfig& config, const ModelData& model, const std::filesystem::path& dir);
void run_evaluate(const RunConfig& config, const std::vector<BiasRecord>& bias, const std::vector<GapRecord>& gaps,
                  const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& dir);
// Writes synthetic datasets and returns the model list pointing at them.
// Fills *reference with the generated reference group when it is empty.
std::vector<ModelInputs> run_synth(const RunConfig& config, const std::filesystem::path& dir,
                                   GroupId* reference = nullptr);

}  // namespace rabbi::cli
