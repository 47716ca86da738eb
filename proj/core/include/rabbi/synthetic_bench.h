#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rabbi/data_model.h"
#include "rabbi/scoring.h"

namespace rabbi {

enum class Family {
  kNormal,        // one Gaussian component
  kSkewMixture,   // weighted Gaussian components
  kPointMassMix,  // weighted point masses, each with uniform jitter of +-scale
};

std::string_view to_string(Family family);
std::optional<Family> parse_family(std::string_view name);

struct MixtureComponent {
  double weight = 1.0;
  double location = 0.0;
  double scale = 1.0;
};

struct GroupDistribution {
  GroupId group;
  Family family = Family::kNormal;
  std::vector<MixtureComponent> components;
};

// Qualification from a latent quality rho * z + sqrt(1 - rho^2) * e, where z
// is the standardized score and e is standard normal noise. A candidate is
// qualified when the latent value exceeds the threshold.
struct QualificationRule {
  double threshold = 0.0;
  double strength = 0.7;
};

struct SyntheticModelSpec {
  std::string model_id = "synthetic";
  std::string subtask = "synthetic";
  std::vector<GroupDistribution> groups;
  int candidates_per_group = 100;
  double score_min = 0.0;
  double score_max = 1.0;
  QualificationRule qualification;
  std::uint64_t seed = 0;
  GroupId reference_group;
  GroupId focus_group;  // protected group of interest; may be empty

  // Throws InputError on invalid parameters.
  void validate() const;
  std::string to_json() const;
  static SyntheticModelSpec from_json(std::string_view json_text);
};

struct SyntheticDataset {
  std::vector<PointwiseRecord> records;  // score evidence
  ScoreTable scores;

  std::vector<CandidateRecord> candidates() const;
};

// Deterministic in spec.seed. Scores are clipped to [score_min, score_max].
SyntheticDataset gen_scores(const SyntheticModelSpec& spec);

struct AdversarialCheck {
  double delta = 0.0;    // mean(focus) - mean(reference)
  double dp_gap = 0.0;   // simulated selection-rate gap
  double rabbi = 0.0;
  bool passes = false;   // |delta| < 0.05 and |dp_gap| > 0.2
};

// Simulates one-per-group pools for the focus group against the reference.
AdversarialCheck check_adversarial(const SyntheticModelSpec& spec, int rounds = 2000, int k = 1);

struct AdversarialCase {
  SyntheticModelSpec spec;
  AdversarialCheck check;
  int attempts = 0;
};

// A focus group whose mean matches the reference while its upper tail sits
// above every other group, so it wins the k=1 slot far more often. Retries
// derived seeds until the realized sample passes check_adversarial; throws
// DomainError after `max_attempts`.
AdversarialCase gen_adversarial_case(std::uint64_t seed, int max_attempts = 1000);

enum class Regime {
  kEssay,   // near-symmetric normal scores on a 1..5 scale
  kResume,  // scores piled up near the top with a low tail, on [0, 1]
};

std::string_view to_string(Regime regime);
std::optional<Regime> parse_regime(std::string_view name);

// `models` specs with ids synth-00, synth-01, ...
std::vector<SyntheticModelSpec> gen_benchmark(Regime regime, int models, std::uint64_t seed);

}  // namespace rabbi
