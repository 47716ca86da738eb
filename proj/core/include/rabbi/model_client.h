#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rabbi/data_model.h"
#include "rabbi/scoring.h"

namespace rabbi {

struct RetryPolicy {
  int count = 3;  // retries after the first attempt
  std::chrono::milliseconds backoff{500};  // doubled after every retry
};

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_env;  // name of the variable holding the bearer token
  std::chrono::milliseconds timeout{60000};
  int parallel = 4;
  RetryPolicy retry;
  double temperature = 0.0;
  int top_logprobs = 20;
  int max_tokens = 16;
  // Send the assistant prefix as a trailing assistant message; otherwise it
  // is appended to the user message.
  bool assistant_prefill = true;

  void validate() const;
  std::string to_json() const;
  static EndpointConfig from_json(std::string_view json_text);
};

enum class PairLabels {
  kName,    // candidates are identified by name in the response
  kLetter,  // candidates are shown as "Essay A" / "Essay B"
};

struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;
  std::string assistant_prefix;
  std::vector<std::string> placeholders;
  std::string context_placeholder;               // e.g. job_description
  std::vector<std::string> candidate_placeholders;  // one (pointwise) or two (pairwise)
  PairLabels pair_labels = PairLabels::kName;

  bool pairwise() const { return candidate_placeholders.size() == 2; }
  // Every <name> in the texts must be declared. Throws InputError.
  void validate() const;
  static PromptTemplate from_json(std::string_view json_text);
};

// resume_point, resume_pair, essay_point, essay_pair.
const PromptTemplate& builtin_template(std::string_view id);
std::vector<std::string> builtin_template_ids();

struct RenderedPrompt {
  std::string system;
  std::string user;
  std::string assistant_prefix;
  std::vector<std::string> warnings;  // bindings the template does not use
};

// Single-pass substitution of <name> placeholders; bound text is inserted
// verbatim and never rescanned. Throws InputError on an unbound placeholder.
RenderedPrompt render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the response body of a successful POST; throws TransportError.
  virtual std::string post(const std::string& path, const std::string& body, const std::string& bearer_token) = 0;
};

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout);

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatResult {
  std::string text;
  std::vector<TokenLogprob> first_token_top;  // top alternatives at the first generated position
  bool from_cache = false;
};

// Request payload (JSON) for a rendered prompt.
std::string build_request(const RenderedPrompt& prompt, const EndpointConfig& config, bool logprobs);
// Parses an OpenAI-style chat completion body. Throws TransportError.
ChatResult parse_chat_response(std::string_view body);

// Chat completions with retries and an on-disk response cache keyed by the
// SHA-256 of the request payload and template id. Safe to call from several
// threads.
class ChatClient {
 public:
  ChatClient(EndpointConfig config, std::shared_ptr<Transport> transport,
             std::optional<std::filesystem::path> cache_dir = std::nullopt);

  ChatResult complete(const RenderedPrompt& prompt, std::string_view template_id, bool logprobs);

  const EndpointConfig& config() const { return config_; }
  int network_calls() const { return network_calls_; }
  int cache_hits() const { return cache_hits_; }

 private:
  EndpointConfig config_;
  std::shared_ptr<Transport> transport_;
  std::optional<std::filesystem::path> cache_dir_;
  std::atomic<int> network_calls_{0};
  std::atomic<int> cache_hits_{0};
};

// Sums exp(logprob) of the top tokens matching each scale label after case
// folding and trimming; a token also matches a label it is a prefix of when
// no other label shares that prefix. Returns nullopt when nothing matches.
std::optional<LabelProbs> extract_label_probs(std::span<const TokenLogprob> top, const LabelScale& scale);

// FIRST/SECOND when exactly one candidate label occurs in the text, TIE on
// a tie phrase ("both", "equal", "equally good", "tie"), INVALID otherwise.
// Letter labels match as standalone capital letters; names match
// case-insensitively.
Verdict parse_pairwise_verdict(std::string_view text, std::string_view first_label, std::string_view second_label,
                               PairLabels labels);

// Candidate plus the text shown to the model.
struct CollectionItem {
  CandidateRecord candidate;
  std::string text;
  std::string name;  // display name used to identify the candidate in pairwise answers
};

// Line-delimited JSON: candidate fields plus "text" and optional "name".
std::vector<CollectionItem> load_collection_items(const std::filesystem::path& path);

struct PointwiseResult {
  PointwisePrediction prediction;
  bool invalid = false;
  bool transport_failure = false;
  std::string error;
};

// Label probabilities at the first generated position, unnormalized.
// Transport failures and answers without any scale label come back invalid.
PointwiseResult score_pointwise_llm(const CollectionItem& item, std::string_view context, const PromptTemplate& tmpl,
                                    ChatClient& client, const LabelScale& scale);

struct PairwiseResult {
  PairwiseResponse response;
  std::string error;  // set on transport failure
};

// One ordered prompt with `first` shown first.
PairwiseResult compare_pairwise_llm(const CollectionItem& first, const CollectionItem& second,
                                    std::string_view context, std::string_view pool_id, const PromptTemplate& tmpl,
                                    ChatClient& client);

struct CollectOptions {
  ScoringMode mode = ScoringMode::kPointwise;
  PromptTemplate tmpl;
  std::optional<LabelScale> scale;               // pointwise only
  std::map<std::string, std::string> contexts;  // subtask -> job description / essay statement
  std::filesystem::path out_dir;
};

struct CollectSummary {
  int requests = 0;
  int failures = 0;         // transport failures after retries
  int invalid_answers = 0;  // answers without a usable label or verdict
  int network_calls = 0;
  int cache_hits = 0;
  std::vector<std::string> errors;

  double failure_rate() const { return requests ? static_cast<double>(failures) / requests : 0.0; }
  std::string to_json() const;
};

// Pointwise: one call per item, written to out_dir/pointwise.jsonl (failed
// items as {"invalid": true} lines). Pairwise: both orders of every pair in
// every pool, written to out_dir/pairwise.jsonl plus candidates.jsonl. Also
// writes manifest.json. Output is sorted, so it does not depend on thread
// scheduling.
CollectSummary collect_run(std::span<const CollectionItem> items, std::span<const PoolSpec> pools,
                           ChatClient& client, const CollectOptions& options);

}  // namespace rabbi
