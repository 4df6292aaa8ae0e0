#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "cotstress/chat_client.hpp"

namespace cotstress {

enum class TemplateId { Reasoning, Semantic };
enum class JudgeId { J1Reasoning, J2Semantic };
enum class ParseStatus { Clean, Recovered, Failed };

std::string_view to_string(TemplateId id);
std::string_view to_string(JudgeId id);
std::string_view to_string(ParseStatus s);

struct JudgeVerdict {
  int rating = -1;  // 0 or 1; meaningful only when parse_status != Failed
  std::string raw_text;
  ParseStatus parse_status = ParseStatus::Failed;
  JudgeId judge_id = JudgeId::J1Reasoning;
  std::string model_name;

  bool failed() const { return parse_status == ParseStatus::Failed; }
};

/// The stored prompt body for a template, with {response0}/{response1} slots.
std::string_view judge_template_body(TemplateId id);

/// Substitutes the two responses into the template. Throws on empty inputs;
/// everything outside the slots is byte-identical to the stored body.
std::string render_judge_prompt(TemplateId id, std::string_view response0,
                                std::string_view response1);

/// Extracts a binary rating: the first standalone 0/1 after a "Rating"
/// marker parses clean; a bare leading 0/1 is recovered; anything else fails.
JudgeVerdict parse_rating(std::string_view raw);

/// Content-hash keyed verdict cache with JSONL persistence. Only parseable
/// responses are stored, so failed queries are retried rather than replayed.
class JudgeCache {
 public:
  JudgeCache() = default;
  explicit JudgeCache(std::string persist_path);

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& raw_text);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  std::string persist_path_;
};

/// One configured judge: template + chat client + cache.
class Judge {
 public:
  Judge(JudgeId id, std::shared_ptr<ChatClient> client, std::string model_name,
        std::shared_ptr<JudgeCache> cache = nullptr);

  /// Render, consult the cache, query, and parse. `parse_retries` controls
  /// how many fresh queries follow an unparseable reply (transport retries
  /// live in the client).
  JudgeVerdict evaluate(std::string_view response0, std::string_view response1,
                        int parse_retries = 0);

  JudgeId id() const { return id_; }
  long remote_calls() const { return remote_calls_; }

 private:
  JudgeId id_;
  TemplateId template_id_;
  std::shared_ptr<ChatClient> client_;
  std::string model_name_;
  std::shared_ptr<JudgeCache> cache_;
  long remote_calls_ = 0;
};

}  // namespace cotstress
