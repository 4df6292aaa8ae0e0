#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cotstress/model.hpp"

namespace cotstress {

/// Tokenizer served by a model bridge endpoint.
class RemoteTokenizer final : public Tokenizer {
 public:
  RemoteTokenizer(std::string base_url, int vocab_size, TokenId eos,
                  std::vector<TokenId> special_ids);

  int vocab_size() const override { return vocab_size_; }
  TokenId eos_id() const override { return eos_; }
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> tokens) const override;
  bool is_special(TokenId id) const override;
  bool is_insertable(TokenId id) const override { return !is_special(id); }

 private:
  std::string base_url_;
  int vocab_size_;
  TokenId eos_;
  std::vector<TokenId> special_ids_;
};

/// Gateway over an HTTP model bridge: tokenization, embeddings, span logits,
/// server-side loss gradients, and generation. The bridge hosts the actual
/// pretrained model (see tools/model_server.py for a reference server).
/// Matrices travel as JSON arrays of doubles, exact under round-trip.
class HttpModelGateway final : public ModelGateway {
 public:
  /// Connects, optionally asks the server to load `model_name` on `device`
  /// with `dtype`, and fetches vocabulary metadata.
  HttpModelGateway(std::string base_url, std::string model_name = "",
                   std::string device = "auto", std::string dtype = "auto");

  std::string backend_id() const override { return backend_id_; }
  int vocab_size() const override { return vocab_size_; }
  int embedding_dim() const override { return embedding_dim_; }
  const Tokenizer& tokenizer() const override { return *tokenizer_; }

  Eigen::MatrixXd embed(std::span<const TokenId> tokens) override;
  Eigen::MatrixXd forward_logits(std::span<const TokenId> tokens, Span span) override;
  Eigen::MatrixXd forward_logits(const Eigen::MatrixXd& embeddings, Span span) override;
  GradientResult loss_gradient(std::span<const TokenId> tokens, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override;
  GradientResult loss_gradient(const Eigen::MatrixXd& embeddings, const LossTargets& targets,
                               const LossSpec& spec, bool want_onehot) override;
  Generation generate(std::span<const TokenId> prefix, const DecodeParams& params) override;
  Generation generate(const Eigen::MatrixXd& prefix_embeddings,
                      const DecodeParams& params) override;

 private:
  std::string post_targets(const LossTargets& targets);
  GradientResult gradient_request(nlohmann::json body, const LossTargets& targets,
                                  const LossSpec& spec, bool want_onehot);

  std::string base_url_;
  std::string backend_id_;
  int vocab_size_ = 0;
  int embedding_dim_ = 0;
  std::unique_ptr<RemoteTokenizer> tokenizer_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> posted_targets_;  // content hash -> id
};

}  // namespace cotstress
