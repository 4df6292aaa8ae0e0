#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace cotstress {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct ChatParams {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 256;
};

/// Chat-completion transport: ordered (role, content) pairs in, text out.
/// Implementations throw TransportError on delivery failure.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const ChatParams& params) = 0;
};

/// OpenAI-style HTTP client. Retries transport failures with exponential
/// backoff (3 attempts), then throws TransportError.
class HttpChatClient final : public ChatClient {
 public:
  /// `base_url` like "https://api.example.com/v1"; the key may be empty for
  /// local endpoints.
  HttpChatClient(std::string base_url, std::string api_key);

  /// Reads the endpoint from `base_env`/`key_env` environment variables.
  static std::unique_ptr<HttpChatClient> from_env(const char* base_env, const char* key_env);

  std::string complete(const std::vector<ChatMessage>& messages,
                       const ChatParams& params) override;

  void set_backoff_ms(int initial_ms) { backoff_ms_ = initial_ms; }

 private:
  std::string scheme_host_;
  std::string path_prefix_;
  std::string api_key_;
  int backoff_ms_ = 500;
};

/// Deterministic offline stand-in for a judge or transfer target.
class MockChatClient final : public ChatClient {
 public:
  enum class Mode {
    AlwaysOne,   // "Rating: 1"
    AlwaysZero,  // "Rating: 0"
    HashRating,  // rating derived from a content hash; stable across runs
    FixedText,   // returns the configured text verbatim
  };

  explicit MockChatClient(Mode mode, std::string fixed_text = "");
  std::string complete(const std::vector<ChatMessage>& messages,
                       const ChatParams& params) override;

  static Mode mode_from_string(const std::string& s);

 private:
  Mode mode_;
  std::string fixed_text_;
};

/// Test/scripting client: content-keyed responses with an optional fallback.
/// Throws TransportError when asked for an unscripted prompt and no fallback
/// is set, or when configured to fail outright.
class ScriptedChatClient final : public ChatClient {
 public:
  void script_exact(const std::string& prompt_content, const std::string& response);
  void script_contains(const std::string& needle, const std::string& response);
  void set_fallback(const std::string& response) { fallback_ = response; }
  void fail_always(const std::string& message) { fail_message_ = message; }

  std::string complete(const std::vector<ChatMessage>& messages,
                       const ChatParams& params) override;

  int calls() const { return calls_; }

 private:
  std::map<std::string, std::string> exact_;
  std::vector<std::pair<std::string, std::string>> contains_;
  std::string fallback_;
  std::string fail_message_;
  int calls_ = 0;
};

}  // namespace cotstress
