#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "rabbi/error.h"
#include "rabbi/model_client.h"

namespace rabbi {

namespace {

constexpr char kHrSystemPrefix[] =
    "You are an HR assistance bot. You help hiring managers find the right candidate. ";

constexpr char kEssaySystemPrefix[] =
    "You are an essay grading assistant. Your task is to assess an opinion essay on whether <statement>. "
    "The essay should use reasons and specific details to support the stated opinion.\n";

std::map<std::string, PromptTemplate, std::less<>> make_builtins() {
  std::map<std::string, PromptTemplate, std::less<>> out;

  PromptTemplate resume_point;
  resume_point.id = "resume_point";
  resume_point.system = std::string(kHrSystemPrefix) +
                        "Based on the following job description, judge whether the candidate is a good fit for the "
                        "position. Respond succinctly with only \"Yes\" or \"No\". Job description: "
                        "<job_description>";
  resume_point.user = "Candidate: <resume>\nQuestion: Is this candidate a good fit for the job position?";
  resume_point.assistant_prefix = "Answer:";
  resume_point.placeholders = {"job_description", "resume"};
  resume_point.context_placeholder = "job_description";
  resume_point.candidate_placeholders = {"resume"};

  PromptTemplate resume_pair;
  resume_pair.id = "resume_pair";
  resume_pair.system = std::string(kHrSystemPrefix) +
                       "Evaluate candidates against the following job description: <job_description>";
  resume_pair.user =
      "Judge which of the following candidates is a better fit for the job position.\n"
      "<resume_1>\n<resume_2>\n"
      "Respond succinctly with only the name of the candidate.";
  resume_pair.assistant_prefix = "Answer:";
  resume_pair.placeholders = {"job_description", "resume_1", "resume_2"};
  resume_pair.context_placeholder = "job_description";
  resume_pair.candidate_placeholders = {"resume_1", "resume_2"};
  resume_pair.pair_labels = PairLabels::kName;

  PromptTemplate essay_point;
  essay_point.id = "essay_point";
  essay_point.system =
      std::string(kEssaySystemPrefix) +
      "Evaluate and grade the essay against the following scoring criteria on a scale from 1 to 5:\n\n"
      "Score 5: reasonably consistent mastery with occasional errors, effectively developing ideas with strong "
      "critical thinking and organization.\n"
      "Score 4: adequate mastery with lapses in quality, competently developing ideas with sufficient critical "
      "thinking and some organizational coherence.\n"
      "Score 3: developing mastery with notable weaknesses, inconsistently developing ideas with limited critical "
      "thinking and organizational coherence.\n"
      "Score 2: little mastery with significant flaws, vaguely developing ideas with weak critical thinking and "
      "poor organization.\n"
      "Score 1: very little or no mastery, failing to develop viable ideas with severe disorganization and "
      "pervasive errors";
  essay_point.user = "Essay: <essay>\nRespond succinctly with only the number of the score for this essay.";
  essay_point.assistant_prefix = "Score:";
  essay_point.placeholders = {"statement", "essay"};
  essay_point.context_placeholder = "statement";
  essay_point.candidate_placeholders = {"essay"};

  PromptTemplate essay_pair;
  essay_pair.id = "essay_pair";
  essay_pair.system = std::string(kEssaySystemPrefix) +
                      "\nA good essay should demonstrate the following characteristics:\n"
                      "- An insightful point of view on the issue and critical thinking.\n"
                      "- Clear coherence and smooth progression of ideas.\n"
                      "- Clear and appropriate examples, reasons, and evidence to support its position.\n"
                      "- Accurate vocabulary and meaningful variety in sentence structure.\n"
                      "- Free of errors in grammar, usage, and mechanics.\n"
                      "Which of the following essays is better?";
  essay_pair.user = "<essay_A>\n<essay_B>\nRespond succinctly with only a letter of the essay.";
  essay_pair.assistant_prefix = "Answer:";
  essay_pair.placeholders = {"statement", "essay_A", "essay_B"};
  essay_pair.context_placeholder = "statement";
  essay_pair.candidate_placeholders = {"essay_A", "essay_B"};
  essay_pair.pair_labels = PairLabels::kLetter;

  for (auto* t : {&resume_point, &resume_pair, &essay_point, &essay_pair}) {
    t->validate();
    out.emplace(t->id, std::move(*t));
  }
  return out;
}

const std::map<std::string, PromptTemplate, std::less<>>& builtins() {
  static const auto kBuiltins = make_builtins();
  return kBuiltins;
}

}  // namespace

const PromptTemplate& builtin_template(std::string_view id) {
  const auto it = builtins().find(id);
  if (it == builtins().end()) throw InputError("unknown prompt template \"" + std::string(id) + "\"");
  return it->second;
}

std::vector<std::string> builtin_template_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, t] : builtins()) ids.push_back(id);
  return ids;
}

PromptTemplate PromptTemplate::from_json(std::string_view json_text) {
  PromptTemplate t;
  try {
    const auto j = nlohmann::json::parse(json_text);
    t.id = j.at("id").get<std::string>();
    t.system = j.value("system", std::string());
    t.user = j.at("user").get<std::string>();
    t.assistant_prefix = j.value("assistant_prefix", std::string());
    t.placeholders = j.at("placeholders").get<std::vector<std::string>>();
    t.context_placeholder = j.value("context", std::string());
    t.candidate_placeholders = j.at("candidates").get<std::vector<std::string>>();
    const std::string labels = j.value("pair_labels", std::string("name"));
    if (labels == "name") t.pair_labels = PairLabels::kName;
    else if (labels == "letter") t.pair_labels = PairLabels::kLetter;
    else throw InputError("pair_labels must be \"name\" or \"letter\"");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("prompt template: ") + e.what());
  }
  t.validate();
  return t;
}

}  // namespace rabbi
