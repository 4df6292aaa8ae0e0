#pragma once

// Test support: a gateway wrapper whose generations can be scripted while
// forwards and gradients stay real, plus helpers for scripted judges. Keyed
// scripting (by exact prefix content) is bit-sharp: any deviation in the
// prefix falls through to the genuine toy decode.

#include <deque>
#include <map>
#include <memory>
#include <string>

#include "cotstress/hash.hpp"
#include "cotstress/judge.hpp"
#include "cotstress/toy_model.hpp"

namespace testsupport {

using namespace cotstress;

class ScriptedGateway final : public ModelGateway {
 public:
  explicit ScriptedGateway(std::shared_ptr<ToyGateway> inner) : inner_(std::move(inner)) {}

  void push_generation(const std::string& text) { queue_.push_back(text); }
  void script_token_prefix(const std::vector<TokenId>& prefix, const std::string& text) {
    by_prefix_[token_key(prefix)] = text;
  }
  void script_embedding_prefix(const Eigen::MatrixXd& prefix, const std::string& text) {
    by_prefix_[embedding_key(prefix)] = text;
  }
  void set_fallback_generation(const std::string& text) { fallback_ = text; }

  std::string backend_id() const override { return inner_->backend_id(); }
  int vocab_size() const override { return inner_->vocab_size(); }
  int embedding_dim() const override { return inner_->embedding_dim(); }
  const Tokenizer& tokenizer() const override { return inner_->tokenizer(); }
  Eigen::MatrixXd embed(std::span<const TokenId> tokens) override { return inner_->embed(tokens); }

  Eigen::MatrixXd forward_logits(std::span<const TokenId> tokens, Span span) override {
    ++counters_.forward_calls;
    return inner_->forward_logits(tokens, span);
  }
  Eigen::MatrixXd forward_logits(const Eigen::MatrixXd& embeddings, Span span) override {
    ++counters_.forward_calls;
    return inner_->forward_logits(embeddings, span);
  }
  GradientResult loss_gradient(std::span<const TokenId> tokens, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override {
    ++counters_.gradient_calls;
    return inner_->loss_gradient(tokens, targets, spec, want_onehot);
  }
  GradientResult loss_gradient(const Eigen::MatrixXd& embeddings, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override {
    ++counters_.gradient_calls;
    return inner_->loss_gradient(embeddings, targets, spec, want_onehot);
  }

  Generation generate(std::span<const TokenId> prefix, const DecodeParams& params) override {
    ++counters_.generate_calls;
    const std::vector<TokenId> key(prefix.begin(), prefix.end());
    if (auto it = by_prefix_.find(token_key(key)); it != by_prefix_.end()) {
      return scripted(it->second);
    }
    return next_or_inner([&] { return inner_->generate(prefix, params); });
  }
  Generation generate(const Eigen::MatrixXd& prefix_embeddings,
                      const DecodeParams& params) override {
    ++counters_.generate_calls;
    if (auto it = by_prefix_.find(embedding_key(prefix_embeddings)); it != by_prefix_.end()) {
      return scripted(it->second);
    }
    return next_or_inner([&] { return inner_->generate(prefix_embeddings, params); });
  }

  std::optional<Eigen::MatrixXd> embedding_table() override {
    return inner_->embedding_table();
  }

 private:
  static std::string token_key(const std::vector<TokenId>& tokens) {
    std::string bytes(reinterpret_cast<const char*>(tokens.data()),
                      tokens.size() * sizeof(TokenId));
    return "tok:" + hash::sha256_hex(bytes);
  }
  static std::string embedding_key(const Eigen::MatrixXd& m) {
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(m.size()) * sizeof(double));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        bytes.append(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
    return "emb:" + hash::sha256_hex(bytes);
  }

  Generation scripted(const std::string& text) {
    Generation g;
    g.text = text;
    g.tokens = inner_->tokenizer().encode(text);
    g.hit_eos = true;
    return g;
  }

  template <typename Fallback>
  Generation next_or_inner(Fallback&& inner_call) {
    if (!queue_.empty()) {
      const std::string text = queue_.front();
      queue_.pop_front();
      return scripted(text);
    }
    if (!fallback_.empty()) return scripted(fallback_);
    return inner_call();
  }

  std::shared_ptr<ToyGateway> inner_;
  std::deque<std::string> queue_;
  std::map<std::string, std::string> by_prefix_;
  std::string fallback_;
};

inline std::shared_ptr<ToyGateway> byte_toy_gateway(std::uint64_t seed = 0, int dim = 32,
                                                    int layers = 2) {
  ToyConfig cfg;
  cfg.vocab_size = 257;
  cfg.dim = dim;
  cfg.heads = 4;
  cfg.layers = layers;
  cfg.mlp_hidden = 2 * dim;
  cfg.seed = seed;
  return std::make_shared<ToyGateway>(cfg, std::make_shared<ByteTokenizer>());
}

inline Judge make_mock_judge(JudgeId id, MockChatClient::Mode mode) {
  return Judge(id, std::make_shared<MockChatClient>(mode), "mock-judge");
}

}  // namespace testsupport
