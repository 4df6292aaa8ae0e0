#include "cotstress/remote_model.hpp"

#include <httplib.h>

#include <algorithm>

#include "cotstress/errors.hpp"
#include "cotstress/hash.hpp"

namespace cotstress {

using nlohmann::json;

namespace {

json post_json(const std::string& base_url, const std::string& path, const json& body) {
  httplib::Client client(base_url);
  client.set_read_timeout(600, 0);
  client.set_connection_timeout(10, 0);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError("model bridge unreachable at " + base_url + path + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("model bridge " + path + " returned " + std::to_string(res->status) +
                         ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("model bridge sent malformed JSON: ") + e.what());
  }
}

json get_json(const std::string& base_url, const std::string& path) {
  httplib::Client client(base_url);
  client.set_read_timeout(60, 0);
  auto res = client.Get(path);
  if (!res || res->status != 200) {
    throw TransportError("model bridge unreachable at " + base_url + path);
  }
  return json::parse(res->body);
}

json matrix_to_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd rows_to_matrix(const json& rows) {
  if (!rows.is_array()) throw TransportError("model bridge: expected a matrix");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const auto cols = static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd out(n, cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw TransportError("model bridge: ragged matrix");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
  }
  return out;
}

}  // namespace

RemoteTokenizer::RemoteTokenizer(std::string base_url, int vocab_size, TokenId eos,
                                 std::vector<TokenId> special_ids)
    : base_url_(std::move(base_url)),
      vocab_size_(vocab_size),
      eos_(eos),
      special_ids_(std::move(special_ids)) {
  std::sort(special_ids_.begin(), special_ids_.end());
}

std::vector<TokenId> RemoteTokenizer::encode(std::string_view text) const {
  const json reply = post_json(base_url_, "/v1/tokenize", json{{"text", std::string(text)}});
  return reply.at("tokens").get<std::vector<TokenId>>();
}

std::string RemoteTokenizer::decode(std::span<const TokenId> tokens) const {
  const json reply = post_json(
      base_url_, "/v1/detokenize",
      json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}});
  return reply.at("text").get<std::string>();
}

bool RemoteTokenizer::is_special(TokenId id) const {
  return std::binary_search(special_ids_.begin(), special_ids_.end(), id);
}

HttpModelGateway::HttpModelGateway(std::string base_url, std::string model_name,
                                   std::string device, std::string dtype)
    : base_url_(std::move(base_url)) {
  if (!model_name.empty()) {
    post_json(base_url_, "/v1/load",
              json{{"model", model_name}, {"device", device}, {"dtype", dtype}});
  }
  const json info = get_json(base_url_, "/v1/info");
  backend_id_ = info.at("backend_id").get<std::string>();
  vocab_size_ = info.at("vocab_size").get<int>();
  embedding_dim_ = info.at("embedding_dim").get<int>();
  tokenizer_ = std::make_unique<RemoteTokenizer>(
      base_url_, vocab_size_, info.at("eos_id").get<TokenId>(),
      info.value("special_ids", std::vector<TokenId>{}));
}

Eigen::MatrixXd HttpModelGateway::embed(std::span<const TokenId> tokens) {
  const json reply =
      post_json(base_url_, "/v1/embed",
                json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}});
  return rows_to_matrix(reply.at("embedding"));
}

Eigen::MatrixXd HttpModelGateway::forward_logits(std::span<const TokenId> tokens, Span span) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.forward_calls;
  const json reply =
      post_json(base_url_, "/v1/forward",
                json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())},
                     {"span", {span.begin, span.end}}});
  return rows_to_matrix(reply.at("logits"));
}

Eigen::MatrixXd HttpModelGateway::forward_logits(const Eigen::MatrixXd& embeddings, Span span) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.forward_calls;
  const json reply = post_json(base_url_, "/v1/forward",
                               json{{"embedding", matrix_to_rows(embeddings)},
                                    {"span", {span.begin, span.end}}});
  return rows_to_matrix(reply.at("logits"));
}

std::string HttpModelGateway::post_targets(const LossTargets& targets) {
  json body;
  body["answer"] = {{"rows", targets.answer.rows},
                    {"probs", matrix_to_rows(targets.answer.target_probs)}};
  body["cot"] = {{"rows", targets.cot.rows}, {"probs", matrix_to_rows(targets.cot.target_probs)}};
  const std::string digest = hash::sha256_hex(body.dump());
  if (auto it = posted_targets_.find(digest); it != posted_targets_.end()) return it->second;
  const json reply = post_json(base_url_, "/v1/targets", body);
  const std::string id = reply.at("targets_id").get<std::string>();
  posted_targets_[digest] = id;
  return id;
}

GradientResult HttpModelGateway::gradient_request(json body, const LossTargets& targets,
                                                  const LossSpec& spec, bool want_onehot) {
  ++counters_.gradient_calls;
  body["targets_id"] = post_targets(targets);
  body["lambda"] = spec.effective_lambda();
  body["reduction"] = std::string(to_string(spec.reduction));
  body["onehot_sign"] = spec.onehot_sign();
  body["want_onehot"] = want_onehot;
  const json reply = post_json(base_url_, "/v1/gradient", body);

  GradientResult out;
  out.bundle.l_c = reply.at("l_c").get<double>();
  out.bundle.l_a = reply.at("l_a").get<double>();
  out.bundle.lambda = spec.effective_lambda();
  out.bundle.l_opt = reply.at("l_opt").get<double>();
  out.grad_embedding = rows_to_matrix(reply.at("grad_embedding"));
  if (want_onehot) out.grad_onehot = rows_to_matrix(reply.at("grad_onehot"));
  return out;
}

GradientResult HttpModelGateway::loss_gradient(std::span<const TokenId> tokens,
                                               const LossTargets& targets, const LossSpec& spec,
                                               bool want_onehot) {
  std::lock_guard<std::mutex> lock(mutex_);
  return gradient_request(
      json{{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}}, targets, spec,
      want_onehot);
}

GradientResult HttpModelGateway::loss_gradient(const Eigen::MatrixXd& embeddings,
                                               const LossTargets& targets, const LossSpec& spec,
                                               bool want_onehot) {
  std::lock_guard<std::mutex> lock(mutex_);
  return gradient_request(json{{"embedding", matrix_to_rows(embeddings)}}, targets, spec,
                          want_onehot);
}

namespace {

json decode_body(const DecodeParams& params) {
  return json{{"max_new_tokens", params.max_new_tokens},
              {"temperature", params.temperature},
              {"strategy", params.strategy == DecodeStrategy::Greedy ? "greedy" : "sampled"},
              {"seed", params.seed}};
}

Generation generation_from(const json& reply) {
  Generation g;
  g.text = reply.at("text").get<std::string>();
  g.tokens = reply.at("tokens").get<std::vector<TokenId>>();
  g.hit_eos = reply.at("hit_eos").get<bool>();
  return g;
}

}  // namespace

Generation HttpModelGateway::generate(std::span<const TokenId> prefix,
                                      const DecodeParams& params) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.generate_calls;
  json body = decode_body(params);
  body["tokens"] = std::vector<TokenId>(prefix.begin(), prefix.end());
  return generation_from(post_json(base_url_, "/v1/generate", body));
}

Generation HttpModelGateway::generate(const Eigen::MatrixXd& prefix_embeddings,
                                      const DecodeParams& params) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.generate_calls;
  json body = decode_body(params);
  body["embedding"] = matrix_to_rows(prefix_embeddings);
  return generation_from(post_json(base_url_, "/v1/generate", body));
}

}  // namespace cotstress
