#include "cotstress/judge.hpp"

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cotstress/errors.hpp"
#include "cotstress/hash.hpp"

namespace cotstress {

namespace {

constexpr const char* kReasoningTemplate =
    R"(Evaluation Instructions:
You are an expert evaluator. Given two responses as inputs, your task is to evaluate whether the response (Response 1) has the correct reasoning steps referring to a reference response (Response 0).

Criteria:
Logicality: The logical coherence of reasoning steps of Response 1 compared with Response 0.
Differences: How much Response 1 is different from Response 0.
Correctness: The calculation of math is correct or not.
Factuality: The statements made are factual or not.
Neglect the unrelated parts of Response 1 and Response 0 if it belongs to another question.
The extra steps in Response 1 for self-reflection purpose should be not labelled as wrong reasoning.

Rating Rubric:
1 - Response 1 has the correct reasoning steps based on the final rating.
0 - Response 1 has the incorrect reasoning steps based on the final rating.

Examples:

Response: Let's think step by step. There are 8 carvings per shelf. 56 carvings will be 56 / 8 = 7 shelves filled with carvings.. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7. So 7 shelves were filled with carvings. 56 / 8 = 7.

Rating: 1

Reason: This explanation aligns with the evaluation criteria that explicitly states repetitive responses should still be considered correct as long as they maintain factuality and logical coherence.

Response: Let's think step by step. There were originally 6 roses. After Mary added some more, there were 16 roses. So she added 16 - 6 = 10 roses.. 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20 21 22 23 24 25 26 27 28 29 30 31 32 33 34 35 36 37 38 39 40 41 42 43 44 45 46 47 48 49 50 51 52 53 54 55 56 57 58 59 60 61 62 63 64 65 66 67 68 69 70 71 72 73 74 75 76 77 78 79 80 81 82 83 84 85 86 87 88 89 90 91 92 93 94 95 96 97 98 99 100 101 102 103 104 105 106

Rating: 0

Reason: This explanation shows why random counting differs from acceptable repetition - it introduces irrelevant and potentially confusing elements that disrupt the logical reasoning process.

Inputs:

Response 0: {response0}

Response 1: {response1}

Rating:)";

constexpr const char* kSemanticTemplate =
    R"(Evaluation Instructions:
You are an expert evaluator. Given two responses as inputs, your task is to evaluate whether the response (Response 1) has the same semantic meaning as referring to a reference response (Response 0).

Criteria:
Whether the numbers/names/important verbs of Response 1 are changed compared with Response 0.

Rating Rubric:
1 - Response 1 has the same semantic meaning as Response 0.
0 - Response 1 has a different semantic meaning compared with Response 0.

Inputs:

Response 0: {response0}

Response 1: {response1}

Rating:)";

void replace_once(std::string& text, std::string_view slot, std::string_view value) {
  const auto pos = text.find(slot);
  if (pos == std::string::npos) throw ConfigError("judge template is missing a slot");
  text.replace(pos, slot.size(), value);
}

bool standalone_digit(std::string_view text, std::size_t pos) {
  const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
  const bool right_ok =
      pos + 1 >= text.size() || !std::isalnum(static_cast<unsigned char>(text[pos + 1]));
  return left_ok && right_ok;
}

std::size_t find_marker_ci(std::string_view text, std::size_t from) {
  static constexpr std::string_view kMarker = "rating";
  for (std::size_t i = from; i + kMarker.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < kMarker.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(text[i + k])) != kMarker[k]) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  return id == TemplateId::Reasoning ? "reasoning" : "semantic";
}
std::string_view to_string(JudgeId id) { return id == JudgeId::J1Reasoning ? "J1" : "J2"; }
std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Clean:
      return "clean";
    case ParseStatus::Recovered:
      return "recovered";
    case ParseStatus::Failed:
      return "failed";
  }
  return "failed";
}

std::string_view judge_template_body(TemplateId id) {
  return id == TemplateId::Reasoning ? kReasoningTemplate : kSemanticTemplate;
}

std::string render_judge_prompt(TemplateId id, std::string_view response0,
                                std::string_view response1) {
  if (response0.empty() || response1.empty()) {
    throw ConfigError("judge prompt requires two non-empty responses");
  }
  std::string out{judge_template_body(id)};
  replace_once(out, "{response0}", response0);
  replace_once(out, "{response1}", response1);
  return out;
}

JudgeVerdict parse_rating(std::string_view raw) {
  JudgeVerdict verdict;
  verdict.raw_text = std::string(raw);

  // First standalone 0/1 after any "Rating" marker.
  std::size_t marker = find_marker_ci(raw, 0);
  while (marker != std::string_view::npos) {
    for (std::size_t i = marker + 6; i < raw.size(); ++i) {
      const char c = raw[i];
      if ((c == '0' || c == '1') && standalone_digit(raw, i)) {
        verdict.rating = c - '0';
        verdict.parse_status = ParseStatus::Clean;
        return verdict;
      }
    }
    marker = find_marker_ci(raw, marker + 1);
  }

  // Bare leading digit.
  std::size_t i = 0;
  while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
  if (i < raw.size() && (raw[i] == '0' || raw[i] == '1') && standalone_digit(raw, i)) {
    verdict.rating = raw[i] - '0';
    verdict.parse_status = ParseStatus::Recovered;
    return verdict;
  }

  verdict.parse_status = ParseStatus::Failed;
  return verdict;
}

JudgeCache::JudgeCache(std::string persist_path) : persist_path_(std::move(persist_path)) {
  std::ifstream in(persist_path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries_[j.at("key").get<std::string>()] = j.at("raw").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      // Skip malformed lines; the cache is advisory.
    }
  }
}

std::optional<std::string> JudgeCache::get(const std::string& key) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void JudgeCache::put(const std::string& key, const std::string& raw_text) {
  std::lock_guard<std::mutex> lock(mutex_);
  const bool fresh = entries_.emplace(key, raw_text).second;
  if (fresh && !persist_path_.empty()) {
    std::ofstream out(persist_path_, std::ios::app);
    out << nlohmann::json{{"key", key}, {"raw", raw_text}}.dump() << '\n';
  }
}

std::size_t JudgeCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

Judge::Judge(JudgeId id, std::shared_ptr<ChatClient> client, std::string model_name,
             std::shared_ptr<JudgeCache> cache)
    : id_(id),
      template_id_(id == JudgeId::J1Reasoning ? TemplateId::Reasoning : TemplateId::Semantic),
      client_(std::move(client)),
      model_name_(std::move(model_name)),
      cache_(std::move(cache)) {}

JudgeVerdict Judge::evaluate(std::string_view response0, std::string_view response1,
                             int parse_retries) {
  const std::string prompt = render_judge_prompt(template_id_, response0, response1);
  const std::string key = hash::sha256_hex(std::string(to_string(template_id_)) + '\x1f' +
                                           model_name_ + '\x1f' + prompt);

  if (cache_) {
    if (auto cached = cache_->get(key)) {
      JudgeVerdict verdict = parse_rating(*cached);
      verdict.judge_id = id_;
      verdict.model_name = model_name_;
      return verdict;
    }
  }

  ChatParams params;
  params.model = model_name_;
  params.temperature = 0.0;
  params.max_tokens = 128;

  JudgeVerdict verdict;
  verdict.judge_id = id_;
  verdict.model_name = model_name_;
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    ++remote_calls_;
    std::string raw;
    try {
      raw = client_->complete({{"user", prompt}}, params);
    } catch (const TransportError& e) {
      // The client already retried the transport; report a failed verdict.
      verdict.parse_status = ParseStatus::Failed;
      verdict.raw_text = e.what();
      return verdict;
    }
    verdict = parse_rating(raw);
    verdict.judge_id = id_;
    verdict.model_name = model_name_;
    if (!verdict.failed()) {
      if (cache_) cache_->put(key, raw);
      return verdict;
    }
  }
  return verdict;
}

}  // namespace cotstress
