#include "rabbi/model_client.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rabbi/error.h"
#include "rabbi/report.h"
#include "text_util.h"

namespace rabbi {

using nlohmann::json;
using nlohmann::ordered_json;

void EndpointConfig::validate() const {
  if (base_url.empty()) throw InputError("endpoint base_url is empty");
  if (model.empty()) throw InputError("endpoint model is empty");
  if (timeout.count() <= 0) throw InputError("endpoint timeout must be > 0");
  if (parallel < 1) throw InputError("endpoint parallel must be >= 1");
  if (retry.count < 0) throw InputError("retry count must be >= 0");
  if (top_logprobs < 1) throw InputError("top_logprobs must be >= 1");
}

std::string EndpointConfig::to_json() const {
  ordered_json j{{"base_url", base_url},
                 {"path", path},
                 {"model", model},
                 {"auth_env", auth_env},
                 {"timeout_ms", timeout.count()},
                 {"parallel", parallel},
                 {"retry", {{"count", retry.count}, {"backoff_ms", retry.backoff.count()}}},
                 {"temperature", temperature},
                 {"top_logprobs", top_logprobs},
                 {"max_tokens", max_tokens},
                 {"assistant_prefill", assistant_prefill}};
  return j.dump(2) + "\n";
}

EndpointConfig EndpointConfig::from_json(std::string_view json_text) {
  EndpointConfig c;
  try {
    const auto j = json::parse(json_text);
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.model = j.value("model", c.model);
    c.auth_env = j.value("auth_env", c.auth_env);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
    c.parallel = j.value("parallel", c.parallel);
    if (const auto r = j.find("retry"); r != j.end()) {
      c.retry.count = r->value("count", c.retry.count);
      c.retry.backoff = std::chrono::milliseconds(r->value("backoff_ms", c.retry.backoff.count()));
    }
    c.temperature = j.value("temperature", c.temperature);
    c.top_logprobs = j.value("top_logprobs", c.top_logprobs);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.assistant_prefill = j.value("assistant_prefill", c.assistant_prefill);
  } catch (const json::exception& e) {
    throw InputError(std::string("endpoint config: ") + e.what());
  }
  return c;
}

namespace {

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls on_text for literal runs and on_placeholder for every <name>.
template <typename Text, typename Placeholder>
void scan_placeholders(std::string_view s, Text on_text, Placeholder on_placeholder) {
  std::size_t literal = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '<') continue;
    std::size_t j = i + 1;
    while (j < s.size() && is_ident(s[j])) ++j;
    if (j == i + 1 || j >= s.size() || s[j] != '>') continue;
    on_text(s.substr(literal, i - literal));
    on_placeholder(s.substr(i + 1, j - i - 1));
    literal = j + 1;
    i = j;
  }
  on_text(s.substr(literal));
}

}  // namespace

void PromptTemplate::validate() const {
  if (id.empty()) throw InputError("prompt template without id");
  const std::set<std::string, std::less<>> declared(placeholders.begin(), placeholders.end());
  for (const std::string* text : {&system, &user, &assistant_prefix}) {
    scan_placeholders(*text, [](std::string_view) {}, [&](std::string_view name) {
      if (!declared.contains(name)) {
        throw InputError("template " + id + ": undeclared placeholder <" + std::string(name) + ">");
      }
    });
  }
  if (candidate_placeholders.empty() || candidate_placeholders.size() > 2) {
    throw InputError("template " + id + ": needs one or two candidate placeholders");
  }
  for (const auto& p : candidate_placeholders) {
    if (!declared.contains(p)) throw InputError("template " + id + ": candidate placeholder <" + p + "> not declared");
  }
  if (!context_placeholder.empty() && !declared.contains(context_placeholder)) {
    throw InputError("template " + id + ": context placeholder <" + context_placeholder + "> not declared");
  }
}

RenderedPrompt render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
  const std::set<std::string, std::less<>> declared(tmpl.placeholders.begin(), tmpl.placeholders.end());
  RenderedPrompt out;
  const auto render = [&](const std::string& text) {
    std::string result;
    scan_placeholders(
        text, [&](std::string_view lit) { result += lit; },
        [&](std::string_view name) {
          if (!declared.contains(name)) {
            result += "<" + std::string(name) + ">";
            return;
          }
          const auto it = bindings.find(std::string(name));
          if (it == bindings.end()) {
            throw InputError("template " + tmpl.id + ": unbound placeholder <" + std::string(name) + ">");
          }
          result += it->second;
        });
    return result;
  };
  out.system = render(tmpl.system);
  out.user = render(tmpl.user);
  out.assistant_prefix = render(tmpl.assistant_prefix);
  for (const auto& [name, value] : bindings) {
    if (!declared.contains(name)) out.warnings.push_back("binding <" + name + "> is not used by " + tmpl.id);
  }
  return out;
}

namespace {

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string base_url, std::chrono::milliseconds timeout)
      : base_url_(std::move(base_url)), timeout_(timeout) {}

  std::string post(const std::string& path, const std::string& body, const std::string& bearer_token) override {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    if (!bearer_token.empty()) client.set_bearer_token_auth(bearer_token);
    const auto res = client.Post(path, body, "application/json");
    if (!res) throw TransportError("POST " + base_url_ + path + ": " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw TransportError("POST " + base_url_ + path + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
  }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::milliseconds timeout) {
  return std::make_shared<HttpTransport>(base_url, timeout);
}

std::string build_request(const RenderedPrompt& prompt, const EndpointConfig& config, bool logprobs) {
  ordered_json messages = ordered_json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  std::string user = prompt.user;
  if (!config.assistant_prefill && !prompt.assistant_prefix.empty()) user += "\n" + prompt.assistant_prefix;
  messages.push_back({{"role", "user"}, {"content", user}});
  if (config.assistant_prefill && !prompt.assistant_prefix.empty()) {
    messages.push_back({{"role", "assistant"}, {"content", prompt.assistant_prefix}});
  }
  ordered_json j{{"model", config.model},
                 {"messages", messages},
                 {"temperature", config.temperature},
                 {"max_tokens", config.max_tokens}};
  if (logprobs) {
    j["logprobs"] = true;
    j["top_logprobs"] = config.top_logprobs;
  }
  return j.dump();
}

ChatResult parse_chat_response(std::string_view body) {
  ChatResult out;
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (content.is_string()) out.text = content.get<std::string>();
    const auto lp = choice.find("logprobs");
    if (lp != choice.end() && lp->is_object()) {
      const auto c = lp->find("content");
      if (c != lp->end() && c->is_array() && !c->empty()) {
        for (const auto& t : c->at(0).at("top_logprobs")) {
          out.first_token_top.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
        }
      }
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
  return out;
}

ChatClient::ChatClient(EndpointConfig config, std::shared_ptr<Transport> transport,
                       std::optional<std::filesystem::path> cache_dir)
    : config_(std::move(config)), transport_(std::move(transport)), cache_dir_(std::move(cache_dir)) {
  config_.validate();
  if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
}

ChatResult ChatClient::complete(const RenderedPrompt& prompt, std::string_view template_id, bool logprobs) {
  const std::string payload = build_request(prompt, config_, logprobs);
  const std::string key = sha256_hex(payload + "\n" + std::string(template_id));
  std::filesystem::path cache_file;
  if (cache_dir_) {
    cache_file = *cache_dir_ / (key + ".json");
    if (std::filesystem::exists(cache_file)) {
      try {
        const auto entry = json::parse(read_text_file(cache_file));
        ChatResult r = parse_chat_response(entry.at("response").get<std::string>());
        r.from_cache = true;
        ++cache_hits_;
        return r;
      } catch (const std::exception&) {
        // Unreadable entry: fetch again and overwrite it.
      }
    }
  }

  std::string token;
  if (!config_.auth_env.empty()) {
    const char* v = std::getenv(config_.auth_env.c_str());
    if (v == nullptr) throw InputError("environment variable " + config_.auth_env + " is not set");
    token = v;
  }

  std::string body;
  ChatResult result;
  auto backoff = config_.retry.backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      ++network_calls_;
      body = transport_->post(config_.path, payload, token);
      result = parse_chat_response(body);
      break;
    } catch (const TransportError&) {
      if (attempt >= config_.retry.count) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }

  if (cache_dir_) {
    ordered_json entry{{"template_id", template_id}, {"request", json::parse(payload)}, {"response", body}};
    std::random_device rd;
    const auto tmp = *cache_dir_ / (key + ".tmp." + std::to_string(rd()));
    write_text_file(tmp, entry.dump(2) + "\n");
    std::filesystem::rename(tmp, cache_file);
  }
  return result;
}

std::optional<LabelProbs> extract_label_probs(std::span<const TokenLogprob> top, const LabelScale& scale) {
  std::vector<std::string> folded;
  for (const auto& e : scale.entries()) folded.push_back(detail::to_lower(detail::trim(e.label)));

  LabelProbs out;
  for (const auto& t : top) {
    const std::string tok = detail::to_lower(detail::trim(t.token));
    if (tok.empty()) continue;
    std::optional<std::size_t> match;
    for (std::size_t i = 0; i < folded.size(); ++i) {
      if (folded[i] == tok) match = i;
    }
    if (!match) {
      std::vector<std::size_t> prefixed;
      for (std::size_t i = 0; i < folded.size(); ++i) {
        if (folded[i].starts_with(tok)) prefixed.push_back(i);
      }
      if (prefixed.size() == 1) match = prefixed.front();
    }
    if (match) out[scale.entries()[*match].label] += std::exp(t.logprob);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

namespace {

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

Verdict parse_pairwise_verdict(std::string_view text, std::string_view first_label, std::string_view second_label,
                               PairLabels labels) {
  const auto tokens = words(text);
  bool first = false;
  bool second = false;
  if (labels == PairLabels::kLetter) {
    for (const auto& w : tokens) {
      first = first || w == first_label;
      second = second || w == second_label;
    }
  } else {
    const std::string lower = detail::to_lower(text);
    const std::string a = detail::to_lower(detail::trim(first_label));
    const std::string b = detail::to_lower(detail::trim(second_label));
    first = !a.empty() && lower.find(a) != std::string::npos;
    second = !b.empty() && lower.find(b) != std::string::npos;
  }
  if (first != second) return first ? Verdict::kFirst : Verdict::kSecond;
  for (const auto& w : tokens) {
    const std::string l = detail::to_lower(w);
    if (l == "both" || l == "tie" || l == "tied" || l == "equal" || l == "equally") return Verdict::kTie;
  }
  return Verdict::kInvalid;
}

std::vector<CollectionItem> load_collection_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<CollectionItem> out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (detail::trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(n) + ": ";
    try {
      const auto j = json::parse(line);
      CollectionItem item;
      item.candidate.candidate_id = j.at("candidate_id").get<std::string>();
      item.candidate.group = j.at("group").get<std::string>();
      item.candidate.subtask = j.at("subtask").get<std::string>();
      const auto& q = j.at("qualified");
      item.candidate.qualified = q.is_boolean() ? q.get<bool>() : q.get<int>() != 0;
      item.text = j.at("text").get<std::string>();
      item.name = j.value("name", std::string());
      if (item.candidate.candidate_id.empty() || item.candidate.group.empty()) {
        throw InputError("candidate_id and group must be non-empty");
      }
      if (!seen.insert({item.candidate.subtask, item.candidate.candidate_id}).second) {
        throw InputError("duplicate candidate_id \"" + item.candidate.candidate_id + "\"");
      }
      out.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
  }
  return out;
}

namespace {

std::map<std::string, std::string> base_bindings(const PromptTemplate& tmpl, std::string_view context) {
  std::map<std::string, std::string> b;
  if (!tmpl.context_placeholder.empty()) b[tmpl.context_placeholder] = std::string(context);
  return b;
}

std::string pair_label(const CollectionItem& item, const PromptTemplate& tmpl, int slot) {
  if (tmpl.pair_labels == PairLabels::kLetter) return slot == 0 ? "A" : "B";
  return item.name.empty() ? item.candidate.candidate_id : item.name;
}

}  // namespace

PointwiseResult score_pointwise_llm(const CollectionItem& item, std::string_view context, const PromptTemplate& tmpl,
                                    ChatClient& client, const LabelScale& scale) {
  if (tmpl.pairwise()) throw InputError("template " + tmpl.id + " is pairwise");
  auto bindings = base_bindings(tmpl, context);
  bindings[tmpl.candidate_placeholders.front()] = item.text;
  const RenderedPrompt prompt = render_prompt(tmpl, bindings);

  PointwiseResult r;
  r.prediction.candidate_id = item.candidate.candidate_id;
  try {
    const ChatResult chat = client.complete(prompt, tmpl.id, true);
    if (auto probs = extract_label_probs(chat.first_token_top, scale)) {
      r.prediction.evidence = std::move(*probs);
    } else {
      r.invalid = true;
      r.error = "no scale label among the top tokens";
    }
  } catch (const TransportError& e) {
    r.invalid = true;
    r.transport_failure = true;
    r.error = e.what();
  }
  return r;
}

PairwiseResult compare_pairwise_llm(const CollectionItem& first, const CollectionItem& second,
                                    std::string_view context, std::string_view pool_id, const PromptTemplate& tmpl,
                                    ChatClient& client) {
  if (!tmpl.pairwise()) throw InputError("template " + tmpl.id + " is pointwise");
  auto bindings = base_bindings(tmpl, context);
  const CollectionItem* shown[2] = {&first, &second};
  for (int slot = 0; slot < 2; ++slot) {
    std::string text = shown[slot]->text;
    if (tmpl.pair_labels == PairLabels::kLetter) text = "Essay " + pair_label(*shown[slot], tmpl, slot) + ": " + text;
    bindings[tmpl.candidate_placeholders[slot]] = std::move(text);
  }
  const RenderedPrompt prompt = render_prompt(tmpl, bindings);

  PairwiseResult r;
  r.response = {first.candidate.subtask, std::string(pool_id), first.candidate.candidate_id,
                second.candidate.candidate_id, Verdict::kInvalid};
  try {
    const ChatResult chat = client.complete(prompt, tmpl.id, false);
    r.response.verdict =
        parse_pairwise_verdict(chat.text, pair_label(first, tmpl, 0), pair_label(second, tmpl, 1), tmpl.pair_labels);
  } catch (const TransportError& e) {
    r.error = e.what();
  }
  return r;
}

std::string CollectSummary::to_json() const {
  ordered_json j{{"requests", requests},         {"failures", failures},
                 {"invalid_answers", invalid_answers}, {"failure_rate", failure_rate()},
                 {"network_calls", network_calls},   {"cache_hits", cache_hits},
                 {"errors", errors}};
  return j.dump(2) + "\n";
}

namespace {

void run_bounded(std::size_t n, int parallel, const std::function<void(std::size_t)>& work) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(parallel, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) work(i);
    });
  }
}

const std::string& context_for(const CollectOptions& options, const std::string& subtask) {
  static const std::string kEmpty;
  if (options.tmpl.context_placeholder.empty()) return kEmpty;
  const auto it = options.contexts.find(subtask);
  if (it == options.contexts.end()) {
    throw InputError("no <" + options.tmpl.context_placeholder + "> text for subtask \"" + subtask + "\"");
  }
  return it->second;
}

}  // namespace

CollectSummary collect_run(std::span<const CollectionItem> items, std::span<const PoolSpec> pools,
                           ChatClient& client, const CollectOptions& options) {
  const int calls_before = client.network_calls();
  const int hits_before = client.cache_hits();
  CollectSummary summary;
  const int parallel = client.config().parallel;

  std::vector<const CollectionItem*> sorted;
  for (const auto& it : items) sorted.push_back(&it);
  std::sort(sorted.begin(), sorted.end(), [](const CollectionItem* a, const CollectionItem* b) {
    return std::tie(a->candidate.subtask, a->candidate.candidate_id) <
           std::tie(b->candidate.subtask, b->candidate.candidate_id);
  });
  for (const auto* it : sorted) context_for(options, it->candidate.subtask);

  if (options.mode == ScoringMode::kPointwise) {
    if (options.tmpl.pairwise()) throw InputError("pointwise collection needs a pointwise template");
    if (!options.scale) throw InputError("pointwise collection needs a label scale");
    std::vector<PointwiseResult> results(sorted.size());
    run_bounded(sorted.size(), parallel, [&](std::size_t i) {
      results[i] = score_pointwise_llm(*sorted[i], context_for(options, sorted[i]->candidate.subtask), options.tmpl,
                                       client, *options.scale);
    });
    std::string out;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const CandidateRecord& c = sorted[i]->candidate;
      ++summary.requests;
      if (!results[i].invalid) {
        out += to_json_line(PointwiseRecord{c, results[i].prediction}) + "\n";
        continue;
      }
      (results[i].transport_failure ? summary.failures : summary.invalid_answers) += 1;
      summary.errors.push_back(c.subtask + "/" + c.candidate_id + ": " + results[i].error);
      ordered_json j{{"candidate_id", c.candidate_id}, {"group", c.group},       {"subtask", c.subtask},
                     {"qualified", c.qualified ? 1 : 0}, {"invalid", true}, {"error", results[i].error}};
      out += j.dump() + "\n";
    }
    write_text_file(options.out_dir / "pointwise.jsonl", out);
  } else {
    if (!options.tmpl.pairwise()) throw InputError("pairwise collection needs a pairwise template");
    std::map<std::pair<std::string, std::string>, const CollectionItem*> by_id;
    for (const auto* it : sorted) by_id[{it->candidate.subtask, it->candidate.candidate_id}] = it;

    struct Task {
      const CollectionItem* first;
      const CollectionItem* second;
      const PoolSpec* pool;
    };
    std::vector<Task> tasks;
    for (const auto& pool : pools) {
      std::vector<const CollectionItem*> members;
      for (const auto& m : pool.members) {
        const auto f = by_id.find({pool.subtask, m});
        if (f == by_id.end()) throw InputError("pool " + pool.pool_id + ": unknown candidate \"" + m + "\"");
        members.push_back(f->second);
      }
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = 0; j < members.size(); ++j) {
          if (i != j) tasks.push_back({members[i], members[j], &pool});
        }
      }
    }
    std::vector<PairwiseResult> results(tasks.size());
    run_bounded(tasks.size(), parallel, [&](std::size_t i) {
      const Task& t = tasks[i];
      results[i] = compare_pairwise_llm(*t.first, *t.second, context_for(options, t.pool->subtask),
                                        t.pool->pool_id, options.tmpl, client);
    });
    std::vector<PairwiseResponse> responses;
    for (const auto& r : results) {
      ++summary.requests;
      if (!r.error.empty()) {
        ++summary.failures;
        summary.errors.push_back(r.response.pool_id + " " + r.response.first + " vs " + r.response.second + ": " +
                                 r.error);
      } else if (r.response.verdict == Verdict::kInvalid) {
        ++summary.invalid_answers;
      }
      responses.push_back(r.response);
    }
    std::sort(responses.begin(), responses.end(), [](const PairwiseResponse& a, const PairwiseResponse& b) {
      return std::tie(a.subtask, a.pool_id, a.first, a.second) < std::tie(b.subtask, b.pool_id, b.first, b.second);
    });
    write_pairwise(options.out_dir / "pairwise.jsonl", responses);
    std::vector<CandidateRecord> candidates;
    for (const auto* it : sorted) candidates.push_back(it->candidate);
    write_candidates(options.out_dir / "candidates.jsonl", candidates);
  }

  summary.network_calls = client.network_calls() - calls_before;
  summary.cache_hits = client.cache_hits() - hits_before;
  ordered_json manifest{{"mode", to_string(options.mode)},
                        {"template_id", options.tmpl.id},
                        {"model", client.config().model},
                        {"temperature", client.config().temperature},
                        {"top_logprobs", client.config().top_logprobs},
                        {"max_tokens", client.config().max_tokens},
                        {"requests", summary.requests},
                        {"failures", summary.failures},
                        {"invalid_answers", summary.invalid_answers}};
  write_text_file(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace rabbi
