#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rabbi/bias_metrics.h"
#include "rabbi/data_model.h"
#include "rabbi/model_client.h"
#include "rabbi/scoring.h"

namespace rabbi::cli {

// Input files of one model. Pointwise runs need `pointwise`; pairwise runs
// need `pairwise` and `candidates`, and `pools` to simulate.
struct ModelInputs {
  std::string model_id;
  ScoringMode mode = ScoringMode::kPointwise;
  std::filesystem::path pointwise;
  std::filesystem::path pairwise;
  std::filesystem::path candidates;
  std::filesystem::path pools;
};

struct SynthConfig {
  std::string regime = "resume";
  int models = 10;
  bool adversarial = false;
  std::filesystem::path spec;  // single user-supplied spec instead of a benchmark
};

struct CollectConfig {
  std::string mode = "point";
  std::string template_id;  // built-in id or template JSON file
  std::filesystem::path items;
  std::filesystem::path pools;
  std::map<std::string, std::string> contexts;
  std::filesystem::path cache_dir;
  double fail_threshold = 0.1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int rounds = 1000;
  std::vector<int> quotas{1};
  std::string default_reference;
  std::map<std::string, GroupId> references;  // subtask -> reference group
  std::filesystem::path output_dir = "rabbi-out";
  std::vector<std::string> formats{"csv", "json"};
  int jobs = 1;
  std::string pool_mode = "one_per_group";
  int pool_size = 10;
  std::optional<LabelScale> scale;
  BinningRule binning;
  std::optional<int> eval_k;
  std::vector<ModelInputs> models;
  SynthConfig synth;
  EndpointConfig endpoint;
  CollectConfig collect;

  // Relative paths inside the file resolve against its directory.
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
  bool wants(std::string_view format) const;
  // Hash of every setting except output_dir and input locations.
  std::string hash(std::string_view command) const;
};

}  // namespace rabbi::cli
