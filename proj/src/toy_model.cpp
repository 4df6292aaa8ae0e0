#include "cotstress/toy_model.hpp"

#include <cmath>
#include <stdexcept>

#include "cotstress/errors.hpp"
#include "cotstress/math.hpp"
#include "cotstress/rng.hpp"

namespace cotstress {
namespace {

constexpr double kLnEps = 1e-5;

Eigen::MatrixXd random_matrix(rng::Rng& r, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * r.normal();
  }
  return m;
}

/// y = xhat .* gamma + beta row-wise, caching xhat and 1/std.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma,
                           const Eigen::VectorXd& beta, LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv_std = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std(i) = inv_std;
    cache.xhat.row(i) = (x.row(i).array() - mu) * inv_std;
    out.row(i) = cache.xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const LayerNormCache& cache,
                                    const Eigen::VectorXd& gamma) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  Eigen::MatrixXd dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gamma.transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) =
        cache.inv_std(i) * (dxhat.array() - m1 - cache.xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

}  // namespace

ToyTransformer::ToyTransformer(const ToyConfig& config) : cfg_(config) {
  if (cfg_.vocab_size < 2) throw ConfigError("toy model: vocab_size must be >= 2");
  if (cfg_.dim % cfg_.heads != 0) throw ConfigError("toy model: dim must divide by heads");

  rng::Rng r(rng::derive_seed(cfg_.seed, "toy-weights"));
  const double d_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
  const double m_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.mlp_hidden));

  token_embedding_ = random_matrix(r, cfg_.vocab_size, cfg_.dim, 0.5);
  pos_embedding_ = random_matrix(r, cfg_.max_seq, cfg_.dim, 0.1);
  layers_.resize(static_cast<std::size_t>(cfg_.layers));
  for (auto& layer : layers_) {
    layer.wq = random_matrix(r, cfg_.dim, cfg_.dim, d_scale);
    layer.wk = random_matrix(r, cfg_.dim, cfg_.dim, d_scale);
    layer.wv = random_matrix(r, cfg_.dim, cfg_.dim, d_scale);
    layer.wo = random_matrix(r, cfg_.dim, cfg_.dim, d_scale);
    layer.w1 = random_matrix(r, cfg_.dim, cfg_.mlp_hidden, d_scale);
    layer.w2 = random_matrix(r, cfg_.mlp_hidden, cfg_.dim, m_scale);
    layer.ln1_gamma = Eigen::VectorXd::Ones(cfg_.dim);
    layer.ln1_beta = Eigen::VectorXd::Zero(cfg_.dim);
    layer.ln2_gamma = Eigen::VectorXd::Ones(cfg_.dim);
    layer.ln2_beta = Eigen::VectorXd::Zero(cfg_.dim);
  }
  lnf_gamma_ = Eigen::VectorXd::Ones(cfg_.dim);
  lnf_beta_ = Eigen::VectorXd::Zero(cfg_.dim);
  unembedding_ = random_matrix(r, cfg_.dim, cfg_.vocab_size, d_scale);
}

Eigen::MatrixXd ToyTransformer::embed(std::span<const TokenId> tokens) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), cfg_.dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId id = tokens[i];
    if (id < 0 || id >= cfg_.vocab_size) throw PromptError("toy model: token id out of range");
    out.row(static_cast<Eigen::Index>(i)) = token_embedding_.row(id);
  }
  return out;
}

ToyForwardCache ToyTransformer::forward(const Eigen::MatrixXd& embeddings) const {
  const Eigen::Index n = embeddings.rows();
  if (n == 0) throw PromptError("toy model: empty input");
  if (n > cfg_.max_seq) throw PromptError("toy model: sequence exceeds max_seq");
  if (embeddings.cols() != cfg_.dim) throw PromptError("toy model: embedding dim mismatch");

  const int heads = cfg_.heads;
  const Eigen::Index dh = cfg_.dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ToyForwardCache cache;
  cache.layers.resize(layers_.size());

  Eigen::MatrixXd x = embeddings + pos_embedding_.topRows(n);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const ToyLayerWeights& w = layers_[li];
    ToyLayerCache& lc = cache.layers[li];

    const Eigen::MatrixXd a_in = layer_norm(x, w.ln1_gamma, w.ln1_beta, lc.ln1);
    lc.attn.q = a_in * w.wq;
    lc.attn.k = a_in * w.wk;
    lc.attn.v = a_in * w.wv;
    lc.attn.probs.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd::Zero(n, n));

    Eigen::MatrixXd attn_concat(n, cfg_.dim);
    for (int h = 0; h < heads; ++h) {
      const auto qh = lc.attn.q.middleCols(h * dh, dh);
      const auto kh = lc.attn.k.middleCols(h * dh, dh);
      const auto vh = lc.attn.v.middleCols(h * dh, dh);
      Eigen::MatrixXd& probs = lc.attn.probs[static_cast<std::size_t>(h)];
      for (Eigen::Index i = 0; i < n; ++i) {
        // Causal: row i attends to positions [0, i].
        Eigen::RowVectorXd scores = (qh.row(i) * kh.topRows(i + 1).transpose()) * scale;
        const double peak = scores.maxCoeff();
        Eigen::RowVectorXd expv = (scores.array() - peak).exp();
        probs.row(i).head(i + 1) = expv / expv.sum();
      }
      attn_concat.middleCols(h * dh, dh) = probs * vh;
    }
    x += attn_concat * w.wo;

    const Eigen::MatrixXd m_in = layer_norm(x, w.ln2_gamma, w.ln2_beta, lc.ln2);
    lc.mlp_act = (m_in * w.w1).array().tanh();
    x += lc.mlp_act * w.w2;
  }

  if (cfg_.final_layernorm) {
    x = layer_norm(x, lnf_gamma_, lnf_beta_, cache.lnf);
  }
  cache.logits = x * unembedding_;
  return cache;
}

Eigen::MatrixXd ToyTransformer::backward_to_input(const ToyForwardCache& cache,
                                                  const Eigen::MatrixXd& embeddings,
                                                  const Eigen::MatrixXd& dlogits) const {
  const Eigen::Index n = embeddings.rows();
  if (dlogits.rows() != n || dlogits.cols() != cfg_.vocab_size) {
    throw std::invalid_argument("backward_to_input: dlogits shape mismatch");
  }
  const int heads = cfg_.heads;
  const Eigen::Index dh = cfg_.dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Eigen::MatrixXd dx = dlogits * unembedding_.transpose();
  if (cfg_.final_layernorm) {
    dx = layer_norm_backward(dx, cache.lnf, lnf_gamma_);
  }

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const ToyLayerWeights& w = layers_[li];
    const ToyLayerCache& lc = cache.layers[li];

    // x_out = x_mid + tanh(LN2(x_mid) W1) W2
    const Eigen::MatrixXd dmlp_act = dx * w.w2.transpose();
    const Eigen::MatrixXd dpre =
        dmlp_act.cwiseProduct((1.0 - lc.mlp_act.array().square()).matrix());
    dx += layer_norm_backward(dpre * w.w1.transpose(), lc.ln2, w.ln2_gamma);

    // x_mid = x_in + Attention(LN1(x_in)) Wo
    const Eigen::MatrixXd dconcat = dx * w.wo.transpose();
    Eigen::MatrixXd dq(n, cfg_.dim), dk(n, cfg_.dim), dv(n, cfg_.dim);
    for (int h = 0; h < heads; ++h) {
      const auto qh = lc.attn.q.middleCols(h * dh, dh);
      const auto kh = lc.attn.k.middleCols(h * dh, dh);
      const auto vh = lc.attn.v.middleCols(h * dh, dh);
      const Eigen::MatrixXd& probs = lc.attn.probs[static_cast<std::size_t>(h)];
      const auto doh = dconcat.middleCols(h * dh, dh);

      const Eigen::MatrixXd dprobs = doh * vh.transpose();
      dv.middleCols(h * dh, dh) = probs.transpose() * doh;

      // Softmax jacobian per causal row; masked entries have probs == 0.
      Eigen::MatrixXd dscores(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dot = dprobs.row(i).head(i + 1).dot(probs.row(i).head(i + 1));
        dscores.row(i).setZero();
        dscores.row(i).head(i + 1) = probs.row(i).head(i + 1).cwiseProduct(
            (dprobs.row(i).head(i + 1).array() - dot).matrix());
      }
      dq.middleCols(h * dh, dh) = scale * (dscores * kh);
      dk.middleCols(h * dh, dh) = scale * (dscores.transpose() * qh);
    }
    const Eigen::MatrixXd da_in =
        dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
    dx += layer_norm_backward(da_in, lc.ln1, w.ln1_gamma);
  }
  return dx;  // d/d(embeddings): the positional term is additive
}

ToyGateway::ToyGateway(const ToyConfig& config, std::shared_ptr<const Tokenizer> tokenizer)
    : model_(config), tokenizer_(std::move(tokenizer)) {
  if (tokenizer_ && tokenizer_->vocab_size() != config.vocab_size) {
    throw ConfigError("toy gateway: tokenizer vocabulary does not match model");
  }
  if (!tokenizer_) throw ConfigError("toy gateway: tokenizer required");
}

std::string ToyGateway::backend_id() const {
  return "toy-v" + std::to_string(model_.config().vocab_size) + "-d" +
         std::to_string(model_.config().dim) + "-l" + std::to_string(model_.config().layers) +
         "-s" + std::to_string(model_.config().seed);
}

Eigen::MatrixXd ToyGateway::embed(std::span<const TokenId> tokens) {
  std::lock_guard<std::mutex> lock(mutex_);
  return model_.embed(tokens);
}

Eigen::MatrixXd ToyGateway::slice_span(const Eigen::MatrixXd& logits, Span span) const {
  if (span.begin < 0 || span.end > logits.rows() || span.begin > span.end) {
    throw std::out_of_range("forward_logits: span out of range");
  }
  return logits.middleRows(span.begin, span.length());
}

Eigen::MatrixXd ToyGateway::forward_logits(std::span<const TokenId> tokens, Span span) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.forward_calls;
  const ToyForwardCache cache = model_.forward(model_.embed(tokens));
  return slice_span(cache.logits, span);
}

Eigen::MatrixXd ToyGateway::forward_logits(const Eigen::MatrixXd& embeddings, Span span) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.forward_calls;
  const ToyForwardCache cache = model_.forward(embeddings);
  return slice_span(cache.logits, span);
}

GradientResult ToyGateway::loss_gradient_impl(const Eigen::MatrixXd& embeddings,
                                              const LossTargets& targets, const LossSpec& spec,
                                              bool want_onehot) {
  ++counters_.gradient_calls;
  const ToyForwardCache cache = model_.forward(embeddings);
  GradientResult out;
  out.bundle = evaluate_losses(cache.logits, targets, spec);
  const Eigen::MatrixXd dlogits = loss_logit_gradient(cache.logits, targets, spec);
  out.grad_embedding = model_.backward_to_input(cache, embeddings, dlogits);
  if (want_onehot) {
    out.grad_onehot =
        spec.onehot_sign() * (out.grad_embedding * model_.token_embedding().transpose());
  }
  return out;
}

GradientResult ToyGateway::loss_gradient(std::span<const TokenId> tokens,
                                         const LossTargets& targets, const LossSpec& spec,
                                         bool want_onehot) {
  std::lock_guard<std::mutex> lock(mutex_);
  return loss_gradient_impl(model_.embed(tokens), targets, spec, want_onehot);
}

GradientResult ToyGateway::loss_gradient(const Eigen::MatrixXd& embeddings,
                                         const LossTargets& targets, const LossSpec& spec,
                                         bool want_onehot) {
  std::lock_guard<std::mutex> lock(mutex_);
  return loss_gradient_impl(embeddings, targets, spec, want_onehot);
}

Generation ToyGateway::decode_loop(Eigen::MatrixXd embeddings, const DecodeParams& params) {
  if (params.max_new_tokens < 1) throw ConfigError("generate: max_new_tokens must be >= 1");
  rng::Rng sampler(params.seed);
  Generation out;
  const TokenId eos = tokenizer_->eos_id();

  for (int step = 0; step < params.max_new_tokens; ++step) {
    const ToyForwardCache cache = model_.forward(embeddings);
    const Eigen::RowVectorXd row = cache.logits.row(cache.logits.rows() - 1);

    TokenId next = 0;
    if (params.strategy == DecodeStrategy::Greedy || params.temperature <= 0.0) {
      Eigen::Index best = 0;
      row.maxCoeff(&best);
      next = static_cast<TokenId>(best);
    } else {
      const Eigen::RowVectorXd probs = math::softmax_rows((row / params.temperature).eval());
      const double u = sampler.uniform();
      double acc = 0.0;
      Eigen::Index chosen = probs.cols() - 1;
      for (Eigen::Index v = 0; v < probs.cols(); ++v) {
        acc += probs(v);
        if (u < acc) {
          chosen = v;
          break;
        }
      }
      next = static_cast<TokenId>(chosen);
    }

    if (next == eos) {
      out.hit_eos = true;
      break;
    }
    out.tokens.push_back(next);
    embeddings.conservativeResize(embeddings.rows() + 1, Eigen::NoChange);
    embeddings.row(embeddings.rows() - 1) = model_.token_embedding().row(next);
  }
  out.text = tokenizer_->decode(out.tokens);
  return out;
}

Generation ToyGateway::generate(std::span<const TokenId> prefix, const DecodeParams& params) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.generate_calls;
  if (prefix.empty()) throw PromptError("generate: empty prefix");
  return decode_loop(model_.embed(prefix), params);
}

Generation ToyGateway::generate(const Eigen::MatrixXd& prefix_embeddings,
                                const DecodeParams& params) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++counters_.generate_calls;
  if (prefix_embeddings.rows() == 0) throw PromptError("generate: empty prefix");
  return decode_loop(prefix_embeddings, params);
}

std::optional<Eigen::MatrixXd> ToyGateway::embedding_table() {
  return model_.token_embedding();
}

}  // namespace cotstress
