#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "cotstress/loss.hpp"
#include "cotstress/prompt.hpp"
#include "cotstress/tokenizer.hpp"

namespace cotstress {

/// Half-open token interval [begin, end).
struct Span {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index length() const { return end - begin; }
};

enum class DecodeStrategy { Greedy, Sampled };

struct DecodeParams {
  int max_new_tokens = 256;
  double temperature = 0.7;
  DecodeStrategy strategy = DecodeStrategy::Greedy;
  std::uint64_t seed = 0;
};

struct Generation {
  std::vector<TokenId> tokens;  // newly generated ids, end-of-sequence excluded
  std::string text;
  bool hit_eos = false;
};

struct GatewayCounters {
  long forward_calls = 0;
  long gradient_calls = 0;
  long generate_calls = 0;
};

/// Losses plus input-space gradients of the composite objective.
/// `grad_embedding` is d(L_opt)/d(input embeddings), the ascent direction on
/// L_opt. `grad_onehot` (when requested) is the gradient at each one-hot
/// token indicator, with the sign fixed by LossSpec::sign_convention.
struct GradientResult {
  LossBundle bundle;
  Eigen::MatrixXd grad_embedding;
  Eigen::MatrixXd grad_onehot;

  bool finite() const {
    return grad_embedding.allFinite() && (grad_onehot.size() == 0 || grad_onehot.allFinite()) &&
           std::isfinite(bundle.l_opt);
  }
};

/// Uniform interface to a differentiable causal language model.
/// Implementations serialize forward/backward calls internally; distinct
/// handles may run concurrently.
class ModelGateway {
 public:
  virtual ~ModelGateway() = default;

  virtual std::string backend_id() const = 0;
  virtual int vocab_size() const = 0;
  virtual int embedding_dim() const = 0;
  virtual const Tokenizer& tokenizer() const = 0;

  /// Token embeddings, one row per token, positional terms excluded.
  virtual Eigen::MatrixXd embed(std::span<const TokenId> tokens) = 0;

  /// Next-token logits at every position of `span`, each computed from the
  /// full prefix context.
  virtual Eigen::MatrixXd forward_logits(std::span<const TokenId> tokens, Span span) = 0;
  virtual Eigen::MatrixXd forward_logits(const Eigen::MatrixXd& embeddings, Span span) = 0;

  virtual GradientResult loss_gradient(std::span<const TokenId> tokens,
                                       const LossTargets& targets, const LossSpec& spec,
                                       bool want_onehot) = 0;
  virtual GradientResult loss_gradient(const Eigen::MatrixXd& embeddings,
                                       const LossTargets& targets, const LossSpec& spec,
                                       bool want_onehot) = 0;

  virtual Generation generate(std::span<const TokenId> prefix, const DecodeParams& params) = 0;
  virtual Generation generate(const Eigen::MatrixXd& prefix_embeddings,
                              const DecodeParams& params) = 0;

  /// Full token-embedding table when the backend can expose it cheaply.
  virtual std::optional<Eigen::MatrixXd> embedding_table() { return std::nullopt; }

  GatewayCounters counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

 protected:
  GatewayCounters counters_;
};

/// Gradient of the configured signed objective with respect to the one-hot
/// token indicator at every position of the prompt.
inline Eigen::MatrixXd gradient_wrt_onehot(ModelGateway& model, const SegmentedPrompt& prompt,
                                           const LossSpec& spec, const LossTargets& targets) {
  return model.loss_gradient(prompt.tokens, targets, spec, /*want_onehot=*/true).grad_onehot;
}

/// Gradient of L_opt with respect to the input embedding matrix.
inline Eigen::MatrixXd gradient_wrt_embedding(ModelGateway& model,
                                              const Eigen::MatrixXd& embeddings,
                                              const LossSpec& spec, const LossTargets& targets) {
  return model.loss_gradient(embeddings, targets, spec, /*want_onehot=*/false).grad_embedding;
}

}  // namespace cotstress
