#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>

#include "cotstress/math.hpp"
#include "cotstress/toy_model.hpp"
#include "support/fd.hpp"

using namespace cotstress;
using testsupport::bare_prompt;
using testsupport::random_tokens;

namespace {

std::shared_ptr<const Tokenizer> char_tok() { return std::make_shared<CharTokenizer>(); }

ToyGateway make_gateway(std::uint64_t seed = 0, int layers = 2, bool final_ln = true) {
  ToyConfig cfg;
  cfg.seed = seed;
  cfg.layers = layers;
  cfg.final_layernorm = final_ln;
  return ToyGateway(cfg, char_tok());
}

/// Builds frozen targets from a reference token sequence with answer span
/// [0, n3) and reasoning span [n3, n4).
LossTargets make_targets(ToyGateway& gw, const std::vector<TokenId>& ref_tokens, Eigen::Index n1,
                         Eigen::Index n2, Eigen::Index n3,
                         CeTarget target = CeTarget::Soft) {
  const auto n4 = static_cast<Eigen::Index>(ref_tokens.size());
  const Eigen::MatrixXd ref_logits = gw.forward_logits(ref_tokens, {0, n4});
  const auto prompt = bare_prompt(ref_tokens, n1, n2, n3);
  return make_loss_targets(ref_logits, identity_alignment(prompt), target);
}

}  // namespace

TEST_CASE("forward_logits shape contract and span slicing") {
  auto gw = make_gateway();
  rng::Rng r(1);
  const auto tokens = random_tokens(r, 5, gw.vocab_size(), gw.tokenizer().eos_id());
  const Eigen::MatrixXd logits = gw.forward_logits(tokens, {3, 5});
  CHECK(logits.rows() == 2);
  CHECK(logits.cols() == gw.vocab_size());
  CHECK(logits.allFinite());
  CHECK_THROWS_AS(gw.forward_logits(tokens, {3, 6}), std::out_of_range);
}

TEST_CASE("identical inputs give bitwise-equal logits") {
  auto gw = make_gateway(7);
  auto gw2 = make_gateway(7);
  rng::Rng r(2);
  const auto tokens = random_tokens(r, 12, gw.vocab_size(), gw.tokenizer().eos_id());
  const Eigen::MatrixXd a = gw.forward_logits(tokens, {0, 12});
  const Eigen::MatrixXd b = gw2.forward_logits(tokens, {0, 12});
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("token input and its own embedding input agree") {
  auto gw = make_gateway(3);
  rng::Rng r(3);
  const auto tokens = random_tokens(r, 10, gw.vocab_size(), gw.tokenizer().eos_id());
  const Eigen::MatrixXd via_tokens = gw.forward_logits(tokens, {0, 10});
  const Eigen::MatrixXd via_embed = gw.forward_logits(gw.embed(tokens), {0, 10});
  CHECK((via_tokens - via_embed).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("causal property: prefix forward equals the full-forward slice") {
  auto gw = make_gateway(4);
  rng::Rng r(4);
  const auto tokens = random_tokens(r, 14, gw.vocab_size(), gw.tokenizer().eos_id());
  const Eigen::MatrixXd full = gw.forward_logits(tokens, {0, 14});
  const std::vector<TokenId> prefix(tokens.begin(), tokens.begin() + 9);
  const Eigen::MatrixXd head = gw.forward_logits(prefix, {0, 9});
  CHECK((full.topRows(9) - head).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embedding gradient matches central finite differences") {
  auto gw = make_gateway(11);
  rng::Rng r(5);
  const auto pert_tokens = random_tokens(r, 16, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto ref_tokens = random_tokens(r, 16, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto targets = make_targets(gw, ref_tokens, 2, 8, 11);

  LossSpec spec;
  spec.lambda = compute_lambda(11, 16);

  const Eigen::MatrixXd emb = gw.embed(pert_tokens);
  const Eigen::MatrixXd grad = gradient_wrt_embedding(gw, emb, spec, targets);
  CHECK(grad.rows() == 16);
  CHECK(grad.cols() == gw.embedding_dim());

  const auto coords = testsupport::top_coordinates(grad, 8, 0, grad.rows());
  for (const auto& [i, j] : coords) {
    testsupport::CoordinateError err;
    err.analytic = grad(i, j);
    err.numeric = testsupport::fd_embedding(gw, emb, targets, spec, i, j);
    CHECK(err.relative() < 1e-4);
  }
}

TEST_CASE("one-hot gradient matches finite differences under both sign conventions") {
  auto gw = make_gateway(12);
  rng::Rng r(6);
  const auto pert_tokens = random_tokens(r, 14, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto ref_tokens = random_tokens(r, 14, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto targets = make_targets(gw, ref_tokens, 2, 7, 10);
  const Eigen::MatrixXd table = *gw.embedding_table();
  const Eigen::MatrixXd emb = gw.embed(pert_tokens);

  for (auto convention : {SignConvention::LiteralEq4, SignConvention::MaximizeLopt}) {
    LossSpec spec;
    spec.lambda = compute_lambda(10, 14);
    spec.sign_convention = convention;

    const auto prompt = bare_prompt(pert_tokens, 2, 7, 10);
    const Eigen::MatrixXd g_tok = gradient_wrt_onehot(gw, prompt, spec, targets);
    CHECK(g_tok.rows() == 14);
    CHECK(g_tok.cols() == gw.vocab_size());

    const auto coords = testsupport::top_coordinates(g_tok, 6, 2, 7);
    for (const auto& [i, v] : coords) {
      testsupport::CoordinateError err;
      err.analytic = g_tok(i, v);
      // The finite difference probes L_opt itself; flip per the convention.
      err.numeric =
          spec.onehot_sign() * testsupport::fd_onehot(gw, table, emb, targets, spec, i, v);
      CHECK(err.relative() < 1e-4);
    }
  }
}

TEST_CASE("linear model one-hot gradient matches the closed form") {
  // No transformer blocks, no final norm: logits = (E + P) * Wu.
  ToyConfig cfg;
  cfg.layers = 0;
  cfg.final_layernorm = false;
  cfg.seed = 9;
  ToyGateway gw(cfg, char_tok());

  rng::Rng r(7);
  const auto pert_tokens = random_tokens(r, 8, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto ref_tokens = random_tokens(r, 8, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto targets = make_targets(gw, ref_tokens, 1, 4, 6);

  LossSpec spec;
  spec.lambda = compute_lambda(6, 8);

  const auto prompt = bare_prompt(pert_tokens, 1, 4, 6);
  const Eigen::MatrixXd g_tok = gradient_wrt_onehot(gw, prompt, spec, targets);

  // Closed form: dL/dlogits from the softmax-minus-target rule, then two
  // fixed linear maps.
  const Eigen::MatrixXd logits = gw.forward_logits(pert_tokens, {0, 8});
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(8, gw.vocab_size());
  for (Eigen::Index k = 0; k < targets.cot.count(); ++k) {
    const Eigen::Index row = targets.cot.rows[static_cast<std::size_t>(k)];
    dlogits.row(row) += (math::softmax_rows(logits.row(row)) - targets.cot.target_probs.row(k)) /
                        static_cast<double>(targets.cot.count());
  }
  for (Eigen::Index k = 0; k < targets.answer.count(); ++k) {
    const Eigen::Index row = targets.answer.rows[static_cast<std::size_t>(k)];
    dlogits.row(row) -= spec.lambda *
                        (math::softmax_rows(logits.row(row)) -
                         targets.answer.target_probs.row(k)) /
                        static_cast<double>(targets.answer.count());
  }
  const Eigen::MatrixXd expected = spec.onehot_sign() * dlogits *
                                   gw.model().unembedding().transpose() *
                                   gw.model().token_embedding().transpose();
  CHECK((g_tok - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("empty reasoning span leaves only the weighted answer gradient") {
  auto gw = make_gateway(13);
  rng::Rng r(8);
  const auto tokens = random_tokens(r, 10, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto ref = random_tokens(r, 10, gw.vocab_size(), gw.tokenizer().eos_id());

  // n3 == n4: no reasoning rows at all.
  const auto targets_empty_cot = make_targets(gw, ref, 1, 5, 10);
  LossSpec spec;
  spec.lambda = 0.7;
  const Eigen::MatrixXd emb = gw.embed(tokens);
  const auto res = gw.loss_gradient(emb, targets_empty_cot, spec, false);
  CHECK(res.bundle.l_c == 0.0);
  CHECK(res.bundle.l_opt == doctest::Approx(-0.7 * res.bundle.l_a).epsilon(1e-12));

  // Answer-only gradient, obtained independently by putting the same rows in
  // the reasoning slot (weight +1) and scaling by -lambda.
  LossTargets answer_as_cot;
  answer_as_cot.cot = targets_empty_cot.answer;
  const auto res_answer = gw.loss_gradient(emb, answer_as_cot, spec, false);
  const Eigen::MatrixXd expected = -0.7 * res_answer.grad_embedding;
  CHECK((res.grad_embedding - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient covers every position and is deterministic for a fixed seed") {
  auto gw1 = make_gateway(21);
  auto gw2 = make_gateway(21);
  rng::Rng r(9);
  const auto tokens = random_tokens(r, 12, gw1.vocab_size(), gw1.tokenizer().eos_id());
  const auto ref = random_tokens(r, 12, gw1.vocab_size(), gw1.tokenizer().eos_id());
  const auto targets = make_targets(gw1, ref, 3, 8, 10);
  LossSpec spec;
  spec.lambda = compute_lambda(10, 12);

  const auto a = gw1.loss_gradient(tokens, targets, spec, true);
  {
    auto tmp = make_targets(gw2, ref, 3, 8, 10);
    const auto b = gw2.loss_gradient(tokens, tmp, spec, true);
    CHECK((a.grad_embedding - b.grad_embedding).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.grad_onehot - b.grad_onehot).cwiseAbs().maxCoeff() == 0.0);
  }
  // Rows outside the loss spans are present (attention feeds them forward).
  CHECK(a.grad_embedding.rows() == 12);
}

TEST_CASE("greedy decoding is deterministic and honors the budget") {
  auto gw = make_gateway(30);
  rng::Rng r(10);
  const auto prefix = random_tokens(r, 6, gw.vocab_size(), gw.tokenizer().eos_id());

  DecodeParams params;
  params.max_new_tokens = 24;
  params.strategy = DecodeStrategy::Greedy;

  const Generation g1 = gw.generate(prefix, params);
  const Generation g2 = gw.generate(prefix, params);
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.text == g2.text);
  if (!g1.hit_eos) CHECK(g1.tokens.size() == 24);
  CHECK(g1.tokens.size() <= 24);
}

TEST_CASE("maximum generation length is honored exactly") {
  ToyConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.mlp_hidden = 32;
  cfg.seed = 31;
  ToyGateway gw(cfg, char_tok());
  rng::Rng r(11);
  const auto prefix = random_tokens(r, 4, gw.vocab_size(), gw.tokenizer().eos_id());

  DecodeParams params;
  params.max_new_tokens = 256;
  const Generation g = gw.generate(prefix, params);
  CHECK(g.tokens.size() <= 256);
  if (!g.hit_eos) CHECK(g.tokens.size() == 256);
}

TEST_CASE("sampled decoding reproduces with a fixed seed") {
  auto gw = make_gateway(32);
  rng::Rng r(12);
  const auto prefix = random_tokens(r, 5, gw.vocab_size(), gw.tokenizer().eos_id());

  DecodeParams params;
  params.strategy = DecodeStrategy::Sampled;
  params.temperature = 0.7;
  params.max_new_tokens = 16;
  params.seed = 99;

  const Generation g1 = gw.generate(prefix, params);
  const Generation g2 = gw.generate(prefix, params);
  CHECK(g1.tokens == g2.tokens);
}

TEST_CASE("embedding-prefix generation matches token-prefix generation") {
  auto gw = make_gateway(33);
  rng::Rng r(13);
  const auto prefix = random_tokens(r, 7, gw.vocab_size(), gw.tokenizer().eos_id());
  DecodeParams params;
  params.max_new_tokens = 12;

  const Generation via_tokens = gw.generate(prefix, params);
  const Generation via_embedding = gw.generate(gw.embed(prefix), params);
  CHECK(via_tokens.tokens == via_embedding.tokens);
  CHECK(via_tokens.text == via_embedding.text);
}

TEST_CASE("gateway counts calls by kind") {
  auto gw = make_gateway(34);
  rng::Rng r(14);
  const auto tokens = random_tokens(r, 6, gw.vocab_size(), gw.tokenizer().eos_id());
  gw.reset_counters();
  (void)gw.forward_logits(tokens, {0, 6});
  const auto ref = random_tokens(r, 6, gw.vocab_size(), gw.tokenizer().eos_id());
  const auto targets = make_targets(gw, ref, 1, 3, 5);
  LossSpec spec;
  (void)gw.loss_gradient(tokens, targets, spec, false);
  DecodeParams params;
  params.max_new_tokens = 2;
  (void)gw.generate(tokens, params);
  const auto counts = gw.counters();
  CHECK(counts.forward_calls == 2);  // one explicit, one inside make_targets
  CHECK(counts.gradient_calls == 1);
  CHECK(counts.generate_calls == 1);
}
