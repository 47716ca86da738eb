#include "rabbi/run_config.h"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "rabbi/allocation_sim.h"
#include "rabbi/error.h"
#include "rabbi/report.h"

namespace rabbi::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  std::filesystem::path p = it->get<std::string>();
  return p.is_relative() ? base / p : p;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig c;
  const auto base = path.parent_path();
  try {
    const auto j = json::parse(read_text_file(path));
    c.seed = j.value("seed", c.seed);
    c.rounds = j.value("rounds", c.rounds);
    if (j.contains("quotas")) c.quotas = j.at("quotas").get<std::vector<int>>();
    if (const auto r = j.find("reference"); r != j.end()) {
      if (r->is_string()) c.default_reference = r->get<std::string>();
      else c.references = r->get<std::map<std::string, GroupId>>();
    }
    c.default_reference = j.value("default_reference", c.default_reference);
    if (j.contains("output_dir")) c.output_dir = resolve(base, j, "output_dir");
    if (j.contains("formats")) c.formats = j.at("formats").get<std::vector<std::string>>();
    c.jobs = j.value("jobs", c.jobs);
    c.pool_mode = j.value("pool_mode", c.pool_mode);
    c.pool_size = j.value("pool_size", c.pool_size);
    if (const auto s = j.find("scale"); s != j.end()) {
      c.scale = s->is_string() ? LabelScale::from_json(read_text_file(resolve(base, j, "scale")))
                               : LabelScale::from_json(s->dump());
    }
    if (const auto b = j.find("binning"); b != j.end()) {
      c.binning.max_distinct = b->value("max_distinct", c.binning.max_distinct);
      c.binning.bins = b->value("bins", c.binning.bins);
    }
    if (j.contains("eval_k")) c.eval_k = j.at("eval_k").get<int>();
    for (const auto& m : j.value("models", json::array())) {
      ModelInputs in;
      in.model_id = m.at("model_id").get<std::string>();
      const std::string mode = m.value("mode", std::string("pointwise"));
      if (mode != "pointwise" && mode != "pairwise") throw InputError("model mode must be pointwise or pairwise");
      in.mode = mode == "pointwise" ? ScoringMode::kPointwise : ScoringMode::kPairwise;
      in.pointwise = resolve(base, m, "pointwise");
      in.pairwise = resolve(base, m, "pairwise");
      in.candidates = resolve(base, m, "candidates");
      in.pools = resolve(base, m, "pools");
      c.models.push_back(std::move(in));
    }
    if (const auto s = j.find("synth"); s != j.end()) {
      c.synth.regime = s->value("regime", c.synth.regime);
      c.synth.models = s->value("models", c.synth.models);
      c.synth.adversarial = s->value("adversarial", c.synth.adversarial);
      c.synth.spec = resolve(base, *s, "spec");
    }
    if (const auto e = j.find("endpoint"); e != j.end()) c.endpoint = EndpointConfig::from_json(e->dump());
    if (const auto col = j.find("collect"); col != j.end()) {
      c.collect.mode = col->value("mode", c.collect.mode);
      c.collect.template_id = col->value("template", c.collect.template_id);
      c.collect.items = resolve(base, *col, "items");
      c.collect.pools = resolve(base, *col, "pools");
      if (col->contains("contexts")) c.collect.contexts = col->at("contexts").get<std::map<std::string, std::string>>();
      c.collect.cache_dir = resolve(base, *col, "cache_dir");
      c.collect.fail_threshold = col->value("fail_threshold", c.collect.fail_threshold);
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return c;
}

void RunConfig::validate() const {
  if (rounds < 1) throw InputError("rounds must be >= 1");
  if (quotas.empty()) throw InputError("quota list is empty");
  for (const int k : quotas) {
    if (k < 1) throw InputError("quota values must be >= 1");
  }
  if (jobs < 1) throw InputError("jobs must be >= 1");
  if (!parse_pool_mode(pool_mode)) throw InputError("unknown pool mode \"" + pool_mode + "\"");
  for (const auto& f : formats) {
    if (f != "csv" && f != "json") throw InputError("unknown report format \"" + f + "\"");
  }
}

bool RunConfig::wants(std::string_view format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

std::string RunConfig::hash(std::string_view command) const {
  ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["rounds"] = rounds;
  j["quotas"] = quotas;
  j["default_reference"] = default_reference;
  j["references"] = references;
  j["formats"] = formats;
  j["pool_mode"] = pool_mode;
  j["pool_size"] = pool_size;
  j["scale"] = scale ? json::parse(scale->to_json()) : json();
  j["binning"] = {binning.max_distinct, binning.bins};
  j["eval_k"] = eval_k ? json(*eval_k) : json();
  j["models"] = json::array();
  for (const auto& m : models) j["models"].push_back({m.model_id, to_string(m.mode)});
  j["synth"] = {synth.regime, synth.models, synth.adversarial};
  return sha256_hex(j.dump());
}

}  // namespace rabbi::cli
