#pragma once

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <vector>

#include "cotstress/model.hpp"

namespace cotstress {

/// Tiny causal transformer, double precision throughout, random weights from
/// a fixed seed. Small enough for finite-difference checks in seconds.
struct ToyConfig {
  int vocab_size = 64;
  int dim = 32;
  int heads = 4;
  int layers = 2;
  int mlp_hidden = 64;
  int max_seq = 1024;
  std::uint64_t seed = 0;
  bool final_layernorm = true;
};

struct ToyLayerWeights {
  Eigen::MatrixXd wq, wk, wv, wo;  // dim x dim
  Eigen::MatrixXd w1;              // dim x mlp_hidden
  Eigen::MatrixXd w2;              // mlp_hidden x dim
  Eigen::VectorXd ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

struct LayerNormCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_std;
};

struct AttentionCache {
  Eigen::MatrixXd q, k, v;                // n x dim, heads laid out in column blocks
  std::vector<Eigen::MatrixXd> probs;     // per head, n x n, causal rows
};

struct ToyLayerCache {
  LayerNormCache ln1, ln2;
  AttentionCache attn;
  Eigen::MatrixXd mlp_act;  // tanh activations, n x mlp_hidden
};

struct ToyForwardCache {
  Eigen::MatrixXd logits;  // n x vocab
  std::vector<ToyLayerCache> layers;
  LayerNormCache lnf;
};

class ToyTransformer {
 public:
  explicit ToyTransformer(const ToyConfig& config);

  const ToyConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& token_embedding() const { return token_embedding_; }
  const Eigen::MatrixXd& unembedding() const { return unembedding_; }

  Eigen::MatrixXd embed(std::span<const TokenId> tokens) const;

  /// Runs the model over token embeddings (positions added internally) and
  /// caches every activation needed for the input-gradient pass.
  ToyForwardCache forward(const Eigen::MatrixXd& embeddings) const;

  /// Backpropagates d(loss)/d(logits) to d(loss)/d(token embeddings).
  /// Weights are fixed; only the input gradient is produced.
  Eigen::MatrixXd backward_to_input(const ToyForwardCache& cache,
                                    const Eigen::MatrixXd& embeddings,
                                    const Eigen::MatrixXd& dlogits) const;

 private:
  ToyConfig cfg_;
  Eigen::MatrixXd token_embedding_;  // vocab x dim
  Eigen::MatrixXd pos_embedding_;    // max_seq x dim
  std::vector<ToyLayerWeights> layers_;
  Eigen::VectorXd lnf_gamma_, lnf_beta_;
  Eigen::MatrixXd unembedding_;  // dim x vocab
};

/// ModelGateway over the toy transformer. Bit-deterministic for a fixed seed.
class ToyGateway final : public ModelGateway {
 public:
  ToyGateway(const ToyConfig& config, std::shared_ptr<const Tokenizer> tokenizer);

  std::string backend_id() const override;
  int vocab_size() const override { return model_.config().vocab_size; }
  int embedding_dim() const override { return model_.config().dim; }
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
  std::optional<Eigen::MatrixXd> embedding_table() override;

  const ToyTransformer& model() const { return model_; }

 private:
  Eigen::MatrixXd slice_span(const Eigen::MatrixXd& logits, Span span) const;
  GradientResult loss_gradient_impl(const Eigen::MatrixXd& embeddings, const LossTargets& targets,
                                    const LossSpec& spec, bool want_onehot);
  Generation decode_loop(Eigen::MatrixXd embeddings, const DecodeParams& params);

  ToyTransformer model_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  std::mutex mutex_;
};

}  // namespace cotstress
