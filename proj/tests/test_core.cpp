#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "cotstress/answer.hpp"
#include "cotstress/errors.hpp"
#include "cotstress/loss.hpp"
#include "cotstress/math.hpp"
#include "cotstress/prompt.hpp"
#include "cotstress/rng.hpp"
#include "cotstress/tokenizer.hpp"

using namespace cotstress;

namespace {

Eigen::MatrixXd random_logits(rng::Rng& r, Eigen::Index rows, Eigen::Index cols,
                              double scale = 3.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * r.normal();
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// math
// ---------------------------------------------------------------------------

TEST_CASE("softmax rows sum to one") {
  rng::Rng r(1);
  const Eigen::MatrixXd logits = random_logits(r, 5, 9);
  const Eigen::MatrixXd probs = math::softmax_rows(logits);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("cross entropy of a distribution with itself equals its entropy") {
  rng::Rng r(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd q = random_logits(r, 3, 7);
    const Eigen::VectorXd ce = math::soft_cross_entropy_rows(q, q);
    const Eigen::VectorXd h = math::entropy_rows(q);
    CHECK((ce - h).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("uniform logits have entropy ln V") {
  const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(1, 4);
  CHECK(math::soft_cross_entropy_rows(q, q)(0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("near-degenerate reference gives near-zero cross entropy against itself") {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(1, 5);
  q(0, 2) = 40.0;
  CHECK(math::soft_cross_entropy_rows(q, q)(0) < 1e-12);
}

TEST_CASE("soft cross entropy matches direct summation oracle") {
  rng::Rng r(3);
  const Eigen::MatrixXd pert = random_logits(r, 3, 5);
  const Eigen::MatrixXd ref = random_logits(r, 3, 5);

  // Independent route: explicit sum of -p_ref * log p_pert.
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    double zp = 0.0, zr = 0.0;
    for (int v = 0; v < 5; ++v) zp += std::exp(pert(i, v));
    for (int v = 0; v < 5; ++v) zr += std::exp(ref(i, v));
    for (int v = 0; v < 5; ++v) {
      const double p_ref = std::exp(ref(i, v)) / zr;
      const double log_p = pert(i, v) - std::log(zp);
      expected -= p_ref * log_p;
    }
  }
  expected /= 3.0;
  CHECK(soft_cross_entropy(pert, ref) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("gibbs inequality holds for random pairs") {
  rng::Rng r(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd q = random_logits(r, 1, 6);
    const Eigen::MatrixXd qp = random_logits(r, 1, 6);
    CHECK(math::soft_cross_entropy_rows(qp, q)(0) >= math::entropy_rows(q)(0));
  }
}

// ---------------------------------------------------------------------------
// loss engine
// ---------------------------------------------------------------------------

TEST_CASE("compute_lambda follows the span-length formula") {
  CHECK(compute_lambda(100, 150) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(compute_lambda(70, 70) == 0.0);
  CHECK_THROWS_AS(compute_lambda(0, 5), std::invalid_argument);
}

TEST_CASE("composite objective arithmetic") {
  LossSpec spec;
  spec.lambda = 0.5;
  CHECK(composite_objective(2.0, 1.0, spec) == doctest::Approx(1.5));

  spec.cot_only = true;
  CHECK(composite_objective(2.0, 123.0, spec) == doctest::Approx(2.0));

  LossSpec zero;
  zero.lambda = 0.0;
  CHECK(composite_objective(2.0, 123.0, zero) == doctest::Approx(2.0));
}

TEST_CASE("objective is linear in the answer loss with slope -lambda") {
  LossSpec spec;
  spec.lambda = 0.7;
  const double base = composite_objective(1.3, 0.0, spec);
  for (double la : {0.5, 1.0, 2.0, 4.0}) {
    CHECK(composite_objective(1.3, la, spec) == doctest::Approx(base - 0.7 * la).epsilon(1e-12));
  }
}

TEST_CASE("soft_cross_entropy rejects mismatched shapes") {
  CHECK_THROWS_AS(
      soft_cross_entropy(Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 3)),
      std::invalid_argument);
}

TEST_CASE("hard-argmax target reading reduces to standard cross entropy") {
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(1, 4);
  ref(0, 1) = 9.0;
  Eigen::MatrixXd pert = Eigen::MatrixXd::Zero(1, 4);
  pert(0, 1) = 1.0;
  // -log softmax(pert)[1]
  const double z = 3.0 * std::exp(0.0) + std::exp(1.0);
  const double expected = -(1.0 - std::log(z));
  CHECK(soft_cross_entropy(pert, ref, CeTarget::HardArgmax) ==
        doctest::Approx(expected).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// tokenizers
// ---------------------------------------------------------------------------

TEST_CASE("byte tokenizer round-trips arbitrary text") {
  ByteTokenizer tok;
  const std::string text = "If there are 3 cars... $21.95, right?\n";
  CHECK(tok.round_trips(text));
  CHECK(tok.encode(text).size() == text.size());
}

TEST_CASE("char tokenizer has vocabulary 64 and rejects unknown characters") {
  CharTokenizer tok;
  CHECK(tok.vocab_size() == 64);
  CHECK(tok.round_trips("the answer is 5."));
  CHECK_THROWS_AS(tok.encode("Uppercase"), PromptError);
  CHECK_FALSE(tok.round_trips("Uppercase"));
}

TEST_CASE("insertable ids exclude specials") {
  ByteTokenizer tok;
  const auto ids = tok.insertable_ids();
  for (TokenId id : ids) {
    CHECK_FALSE(tok.is_special(id));
    CHECK(id >= 32);
    CHECK(id <= 126);
  }
}

// ---------------------------------------------------------------------------
// answer extraction
// ---------------------------------------------------------------------------

TEST_CASE("extract_answer parses the numeric pattern") {
  auto got = extract_answer("The answer is 5. Let's think step by step...", TaskKind::Numeric);
  REQUIRE(got.has_value());
  CHECK(got->value.equals(NormalizedAnswer::numeric(5)));
}

TEST_CASE("extract_answer parses booleans") {
  auto got =
      extract_answer("The answer is yes Holy Saturday is the day...", TaskKind::Boolean);
  REQUIRE(got.has_value());
  CHECK(got->value.equals(NormalizedAnswer::boolean(true)));
}

TEST_CASE("extract_answer strips currency") {
  auto got = extract_answer("The answer is $21.95 Let's think...", TaskKind::Numeric);
  REQUIRE(got.has_value());
  CHECK(got->value.equals(NormalizedAnswer::numeric(21.95)));
}

TEST_CASE("extract_answer fails without the marker") {
  CHECK_FALSE(extract_answer("no answer marker here", TaskKind::Numeric).has_value());
}

TEST_CASE("extract_answer skips label junk before the number") {
  auto got = extract_answer("The answer is B: 15 Let's think again.", TaskKind::Numeric);
  REQUIRE(got.has_value());
  CHECK(got->value.equals(NormalizedAnswer::numeric(15)));
}

TEST_CASE("extract_answer handles digit-group commas") {
  auto got = extract_answer("the answer is 1,234.5 exactly", TaskKind::Numeric);
  REQUIRE(got.has_value());
  CHECK(got->value.equals(NormalizedAnswer::numeric(1234.5)));
}

TEST_CASE("extract_answer is idempotent on its own rendering") {
  for (auto value : {NormalizedAnswer::numeric(21.95), NormalizedAnswer::numeric(-3),
                     NormalizedAnswer::boolean(false)}) {
    const std::string rendered = "The answer is " + value.canonical_text() + ".";
    auto got = extract_answer(rendered, value.kind);
    REQUIRE(got.has_value());
    CHECK(got->value.equals(value));
  }
}

TEST_CASE("split_answer_cot separates the answer sentence from the reasoning") {
  auto split =
      split_answer_cot("The answer is 5. Let's think step by step. 3 + 2 = 5.", TaskKind::Numeric);
  REQUIRE(split.parsed);
  CHECK(split.answer_text == "The answer is 5.");
  CHECK(split.cot_text == "Let's think step by step. 3 + 2 = 5.");

  auto no_period = split_answer_cot("The answer is 12 Let's think.", TaskKind::Numeric);
  REQUIRE(no_period.parsed);
  CHECK(no_period.answer_text == "The answer is 12");
  CHECK(no_period.cot_text == "Let's think.");
}

// ---------------------------------------------------------------------------
// segmented prompts
// ---------------------------------------------------------------------------

TEST_CASE("build_segmented_prompt produces ordered boundaries and round-trips") {
  ByteTokenizer tok;
  const auto prompt = build_segmented_prompt(
      {}, "If there are 3 cars in the parking lot and 2 more cars arrive, how many cars are in "
          "the parking lot?",
      "The answer is 5.", "Let's think step by step. 3 + 2 = 5.", tok);
  CHECK(prompt.n1 == 0);
  CHECK(prompt.n1 < prompt.n2);
  CHECK(prompt.n2 < prompt.n3);
  CHECK(prompt.n3 < prompt.n4);
  CHECK(prompt.n4 == static_cast<Eigen::Index>(prompt.tokens.size()));
  CHECK(tok.decode(prompt.question_tokens()) == prompt.text_segments[1]);
  CHECK(tok.decode(prompt.tokens) == prompt.full_text());
}

TEST_CASE("question-only prompt collapses the trailing spans") {
  ByteTokenizer tok;
  const auto prompt = build_segmented_prompt({}, "just a question?", "", "", tok);
  CHECK(prompt.n2 == prompt.n3);
  CHECK(prompt.n3 == prompt.n4);
}

TEST_CASE("exemplars fill the leading block and n1 counts their tokens") {
  ByteTokenizer tok;
  std::vector<Exemplar> exemplars(8);
  for (int i = 0; i < 8; ++i) {
    exemplars[static_cast<std::size_t>(i)] = {
        "question " + std::to_string(i) + "?", "The answer is " + std::to_string(i) + ".",
        "Let's think step by step. It is " + std::to_string(i) + "."};
  }
  PromptTemplate tmpl;
  const auto prompt = build_segmented_prompt(exemplars, "new question?", "", "", tok);

  // Independent recount of the in-context block.
  std::string icl;
  for (const auto& e : exemplars) icl += tmpl.render_exemplar(e);
  CHECK(prompt.n1 == static_cast<Eigen::Index>(tok.encode(icl).size()));
  CHECK(prompt.text_segments[0] == icl);
}

TEST_CASE("exemplar rendering is answer-first by default and literal on request") {
  Exemplar e{"q?", "The answer is 1.", "Because."};
  PromptTemplate tmpl;
  CHECK(tmpl.render_exemplar(e) == "q?\nThe answer is 1. Because.\n\n");
  tmpl.exemplar_order = ExemplarOrder::CotFirst;
  CHECK(tmpl.render_exemplar(e) == "q?\nBecause. The answer is 1.\n\n");
}

TEST_CASE("splice_question shifts the downstream boundaries by the delta") {
  ByteTokenizer tok;
  const auto prompt = build_segmented_prompt({{"ex?", "The answer is 1.", "Cot."}},
                                             "twenty token question", "The answer is 2.",
                                             "Some reasoning.", tok);
  std::vector<TokenId> longer = tok.encode("twenty token question plus");
  const auto spliced = splice_question(prompt, longer, tok);
  const auto delta = static_cast<Eigen::Index>(longer.size()) - prompt.question_length();
  CHECK(spliced.n1 == prompt.n1);
  CHECK(spliced.n2 == prompt.n2 + delta);
  CHECK(spliced.n3 == prompt.n3 + delta);
  CHECK(spliced.n4 == prompt.n4 + delta);

  // Identity splice leaves the prompt unchanged.
  const auto same = splice_question(prompt, prompt.question_tokens(), tok);
  CHECK(same.tokens == prompt.tokens);
  CHECK(same.n4 == prompt.n4);

  // Non-question spans are byte-identical after detokenization.
  CHECK(tok.decode(std::span<const TokenId>(spliced.tokens).first(
            static_cast<std::size_t>(spliced.n1))) == prompt.text_segments[0]);
  CHECK(spliced.text_segments[2] == prompt.text_segments[2]);
  CHECK(spliced.text_segments[3] == prompt.text_segments[3]);

  CHECK_THROWS_AS(splice_question(prompt, std::vector<TokenId>{}, tok), PromptError);
}

TEST_CASE("prompt segments concatenate to the full text") {
  ByteTokenizer tok;
  const auto prompt = build_segmented_prompt({{"a?", "The answer is 1.", "B."}}, "q?",
                                             "The answer is 3.", "C.", tok);
  CHECK(prompt.full_text() ==
        prompt.text_segments[0] + prompt.text_segments[1] + prompt.text_segments[2] +
            prompt.text_segments[3]);
  CHECK(tok.decode(prompt.tokens) == prompt.full_text());
}

// ---------------------------------------------------------------------------
// alignment
// ---------------------------------------------------------------------------

TEST_CASE("alignment maps equal-length segments exactly and truncates the rest") {
  ByteTokenizer tok;
  const auto ref = build_segmented_prompt({{"e?", "The answer is 0.", "R."}}, "short q",
                                          "The answer is 7.", "Reason ref.", tok);
  std::vector<TokenId> longer = tok.encode("short q with insertions");
  const auto pert = splice_question(ref, longer, tok);

  const auto alignment = align_prompts(ref, pert);
  // Answer span rows: full ICL + min(question) + full answer.
  const auto expected_answer =
      ref.n1 + std::min(ref.question_length(), pert.question_length()) + (ref.n3 - ref.n2);
  CHECK(static_cast<Eigen::Index>(alignment.answer.reference_rows.size()) == expected_answer);
  CHECK(alignment.answer.reference_rows.size() == alignment.answer.perturbed_rows.size());
  // The answer segment rows line up at the corresponding offsets.
  const auto n_ans = ref.n3 - ref.n2;
  for (Eigen::Index i = 0; i < n_ans; ++i) {
    const auto idx = alignment.answer.reference_rows.size() - static_cast<std::size_t>(i) - 1;
    CHECK(alignment.answer.reference_rows[idx] == ref.n3 - 1 - i);
    CHECK(alignment.answer.perturbed_rows[idx] == pert.n3 - 1 - i);
  }
  CHECK(alignment.cot.reference_rows.size() == static_cast<std::size_t>(ref.n4 - ref.n3));
}

TEST_CASE("determinism of the rng helpers") {
  rng::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.uniform_int(0, 99) == b.uniform_int(0, 99));
    CHECK(a.normal() == b.normal());
  }
  CHECK(rng::derive_seed(7, "example-1") == rng::derive_seed(7, "example-1"));
  CHECK(rng::derive_seed(7, "example-1") != rng::derive_seed(7, "example-2"));
}
