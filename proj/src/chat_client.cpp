#include "cotstress/chat_client.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "cotstress/errors.hpp"
#include "cotstress/hash.hpp"

namespace cotstress {

using nlohmann::json;

namespace {

/// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& base) {
  const auto scheme_end = base.find("://");
  const auto path_start =
      base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {base, ""};
  std::string path = base.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base.substr(0, path_start), path};
}

}  // namespace

HttpChatClient::HttpChatClient(std::string base_url, std::string api_key)
    : api_key_(std::move(api_key)) {
  auto [host, path] = split_base_url(base_url);
  scheme_host_ = std::move(host);
  path_prefix_ = std::move(path);
}

std::unique_ptr<HttpChatClient> HttpChatClient::from_env(const char* base_env,
                                                         const char* key_env) {
  const char* base = std::getenv(base_env);
  if (base == nullptr || *base == '\0') {
    throw ConfigError(std::string("environment variable ") + base_env + " is not set");
  }
  const char* key = std::getenv(key_env);
  return std::make_unique<HttpChatClient>(base, key != nullptr ? key : "");
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages,
                                     const ChatParams& params) {
  json body;
  body["model"] = params.model;
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  body["messages"] = json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  const std::string payload = body.dump();

  std::string last_error;
  int backoff = backoff_ms_;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    httplib::Client client(scheme_host_);
    client.set_read_timeout(120, 0);
    client.set_connection_timeout(10, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                           "application/json");
    if (!res) {
      last_error = "connection failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("malformed completion payload: ") + e.what();
    }
  }
  throw TransportError("chat completion failed after 3 attempts: " + last_error);
}

MockChatClient::MockChatClient(Mode mode, std::string fixed_text)
    : mode_(mode), fixed_text_(std::move(fixed_text)) {}

MockChatClient::Mode MockChatClient::mode_from_string(const std::string& s) {
  if (s == "always1") return Mode::AlwaysOne;
  if (s == "always0") return Mode::AlwaysZero;
  if (s == "hash") return Mode::HashRating;
  if (s == "fixed") return Mode::FixedText;
  throw ConfigError("unknown mock chat mode: " + s);
}

std::string MockChatClient::complete(const std::vector<ChatMessage>& messages,
                                     const ChatParams& params) {
  (void)params;
  switch (mode_) {
    case Mode::AlwaysOne:
      return "Rating: 1\nReason: deterministic mock verdict.";
    case Mode::AlwaysZero:
      return "Rating: 0\nReason: deterministic mock verdict.";
    case Mode::FixedText:
      return fixed_text_;
    case Mode::HashRating: {
      std::string all;
      for (const auto& m : messages) all += m.content;
      const int rating = (hash::sha256_hex(all)[0] & 1) ? 1 : 0;
      return "Rating: " + std::to_string(rating) + "\nReason: content-hash mock verdict.";
    }
  }
  throw ConfigError("unreachable mock mode");
}

void ScriptedChatClient::script_exact(const std::string& prompt_content,
                                      const std::string& response) {
  exact_[prompt_content] = response;
}

void ScriptedChatClient::script_contains(const std::string& needle, const std::string& response) {
  contains_.emplace_back(needle, response);
}

std::string ScriptedChatClient::complete(const std::vector<ChatMessage>& messages,
                                         const ChatParams&) {
  ++calls_;
  if (!fail_message_.empty()) throw TransportError(fail_message_);
  std::string all;
  for (const auto& m : messages) all += m.content;
  if (auto it = exact_.find(all); it != exact_.end()) return it->second;
  for (const auto& [needle, response] : contains_) {
    if (all.find(needle) != std::string::npos) return response;
  }
  if (!fallback_.empty()) return fallback_;
  throw TransportError("scripted client: no response scripted for this prompt");
}

}  // namespace cotstress
