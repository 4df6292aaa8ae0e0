#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "cotstress/model.hpp"

namespace cotstress {

/// Persistent generation cache keyed by (backend, prefix bytes, decode
/// params). JSONL-backed like the judge cache; concurrent readers, one
/// writer at a time.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(std::string persist_path);

  std::optional<Generation> get(const std::string& key);
  void put(const std::string& key, const Generation& gen);

  static std::string key_for_tokens(const std::string& backend_id,
                                    std::span<const TokenId> prefix, const DecodeParams& params);
  static std::string key_for_embedding(const std::string& backend_id,
                                       const Eigen::MatrixXd& prefix,
                                       const DecodeParams& params);

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, Generation> entries_;
  std::string persist_path_;
};

/// Decorator adding generation caching to any gateway. Forward and gradient
/// calls pass straight through.
class CachedGateway final : public ModelGateway {
 public:
  CachedGateway(std::shared_ptr<ModelGateway> inner, std::shared_ptr<GenerationCache> cache);

  std::string backend_id() const override { return inner_->backend_id(); }
  int vocab_size() const override { return inner_->vocab_size(); }
  int embedding_dim() const override { return inner_->embedding_dim(); }
  const Tokenizer& tokenizer() const override { return inner_->tokenizer(); }
  Eigen::MatrixXd embed(std::span<const TokenId> tokens) override {
    return inner_->embed(tokens);
  }
  Eigen::MatrixXd forward_logits(std::span<const TokenId> tokens, Span span) override {
    return inner_->forward_logits(tokens, span);
  }
  Eigen::MatrixXd forward_logits(const Eigen::MatrixXd& embeddings, Span span) override {
    return inner_->forward_logits(embeddings, span);
  }
  GradientResult loss_gradient(std::span<const TokenId> tokens, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override {
    return inner_->loss_gradient(tokens, targets, spec, want_onehot);
  }
  GradientResult loss_gradient(const Eigen::MatrixXd& embeddings, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override {
    return inner_->loss_gradient(embeddings, targets, spec, want_onehot);
  }
  Generation generate(std::span<const TokenId> prefix, const DecodeParams& params) override;
  Generation generate(const Eigen::MatrixXd& prefix_embeddings,
                      const DecodeParams& params) override;
  std::optional<Eigen::MatrixXd> embedding_table() override {
    return inner_->embedding_table();
  }

  long cache_hits() const { return hits_; }

 private:
  std::shared_ptr<ModelGateway> inner_;
  std::shared_ptr<GenerationCache> cache_;
  long hits_ = 0;
};

}  // namespace cotstress
