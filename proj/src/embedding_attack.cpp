#include "cotstress/embedding_attack.hpp"

#include <filesystem>
#include <fstream>

#include "cotstress/errors.hpp"
#include "cotstress/rng.hpp"

namespace cotstress {

std::string_view to_string(EpsilonMode m) {
  return m == EpsilonMode::GlobalRange ? "global-range" : "per-element-abs";
}

EpsilonMode epsilon_mode_from_string(std::string_view s) {
  if (s == "global-range") return EpsilonMode::GlobalRange;
  if (s == "per-element-abs") return EpsilonMode::PerElementAbs;
  throw ConfigError("unknown epsilon mode: " + std::string(s));
}

Eigen::MatrixXd epsilon_absolute(const Eigen::MatrixXd& embeddings, Span question_span,
                                 double epsilon, EpsilonMode mode) {
  if (question_span.length() <= 0) throw std::invalid_argument("epsilon_absolute: empty span");
  if (question_span.begin < 0 || question_span.end > embeddings.rows()) {
    throw std::out_of_range("epsilon_absolute: span out of range");
  }
  const auto block = embeddings.middleRows(question_span.begin, question_span.length());
  if (mode == EpsilonMode::GlobalRange) {
    const double range = block.maxCoeff() - block.minCoeff();
    if (range == 0.0) {
      throw std::domain_error("epsilon_absolute: constant embedding span has no range");
    }
    return Eigen::MatrixXd::Constant(question_span.length(), embeddings.cols(),
                                     epsilon * range);
  }
  return epsilon * block.cwiseAbs();
}

double PerturbationState::max_violation() const {
  const auto delta = (perturbed.middleRows(question_span.begin, question_span.length()) -
                      original.middleRows(question_span.begin, question_span.length()))
                         .cwiseAbs();
  return (delta - eps_abs).maxCoeff();
}

bool PerturbationState::rows_outside_span_identical() const {
  for (Eigen::Index i = 0; i < original.rows(); ++i) {
    if (i >= question_span.begin && i < question_span.end) continue;
    if (original.row(i) != perturbed.row(i)) return false;
  }
  return true;
}

PerturbationState make_perturbation_state(const Eigen::MatrixXd& embeddings, Span question_span,
                                          double epsilon, EpsilonMode mode) {
  PerturbationState state;
  state.original = embeddings;
  state.perturbed = embeddings;
  state.eps_abs = epsilon_absolute(embeddings, question_span, epsilon, mode);
  state.question_span = question_span;
  return state;
}

void pgd_step(PerturbationState& state, const Eigen::MatrixXd& gradient, double alpha) {
  if (gradient.rows() != state.original.rows() || gradient.cols() != state.original.cols()) {
    throw std::invalid_argument("pgd_step: gradient shape mismatch");
  }
  const auto span = state.question_span;
  const auto grad_block = gradient.middleRows(span.begin, span.length());
  if (!grad_block.allFinite()) return;  // skip, logged by the caller

  const auto original_block = state.original.middleRows(span.begin, span.length());
  auto block = state.perturbed.middleRows(span.begin, span.length());

  const Eigen::MatrixXd proposal =
      block + alpha * state.eps_abs.cwiseProduct(grad_block.cwiseSign());
  block = proposal.cwiseMax(original_block - state.eps_abs)
              .cwiseMin(original_block + state.eps_abs);
}

namespace {

void maybe_store_delta(const PerturbationState& state, const AttackContext& ctx,
                       AttackRecord& record) {
  if (!ctx.delta_dir) return;
  std::filesystem::create_directories(*ctx.delta_dir);
  const std::string path = *ctx.delta_dir + "/" + record.example_id + ".f32";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding delta: " + path);
  const auto span = state.question_span;
  // Row-major 32-bit floats of (perturbed - original) over the question rows.
  for (Eigen::Index i = span.begin; i < span.end; ++i) {
    for (Eigen::Index j = 0; j < state.original.cols(); ++j) {
      const float v = static_cast<float>(state.perturbed(i, j) - state.original(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  record.delta_path = path;
}

double token_identity_rate(ModelGateway& model, const PerturbationState& state,
                           std::span<const TokenId> question_tokens) {
  auto table = model.embedding_table();
  if (!table) return -1.0;
  const auto span = state.question_span;
  long matches = 0;
  for (Eigen::Index i = 0; i < span.length(); ++i) {
    const Eigen::RowVectorXd row = state.perturbed.row(span.begin + i);
    Eigen::Index nearest = 0;
    (table->rowwise() - row).rowwise().squaredNorm().minCoeff(&nearest);
    if (nearest == static_cast<Eigen::Index>(question_tokens[static_cast<std::size_t>(i)])) {
      ++matches;
    }
  }
  return static_cast<double>(matches) / static_cast<double>(span.length());
}

}  // namespace

AttackRecord run_embedding_attack(AttackContext& ctx, const BenchmarkExample& example,
                                  const EmbeddingAttackConfig& config) {
  AttackRecord record;
  record.example_id = example.id;
  record.dataset = example.dataset;
  record.task_kind = std::string(to_string(example.task_kind));
  record.ground_truth = example.ground_truth.canonical_text();
  record.model_id = ctx.model.backend_id();
  record.attack = "embedding";
  record.mode = std::string(to_string(config.epsilon_mode));
  record.seed_global = ctx.global_seed;
  record.seed_example = example_seed(ctx.global_seed, example.id);
  record.config = {
      {"epsilon", config.epsilon},
      {"alpha", config.alpha},
      {"steps", config.steps},
      {"epsilon_mode", std::string(to_string(config.epsilon_mode))},
      {"ce_target", std::string(to_string(config.loss.ce_target))},
      {"reduction", std::string(to_string(config.loss.reduction))},
  };
  record.original_question = example.question;
  record.perturbed_question = example.question;  // token sequence never changes

  try {
    BaselineResult base = run_baseline(ctx, example, record.seed_example);
    record.baseline = make_generation_trace(base.generation, base.split, example);
    record.original_question_tokens.assign(base.question_prompt.question_tokens().begin(),
                                           base.question_prompt.question_tokens().end());
    record.perturbed_question_tokens = record.original_question_tokens;
    if (!base.correct) {
      record.outcome = Outcome::IncorrectBaseline;
      return record;
    }

    const SegmentedPrompt reference_prompt = build_segmented_prompt(
        ctx.exemplars, example.question, base.split.answer_text, base.split.cot_text,
        ctx.model.tokenizer(), ctx.prompt_template);
    record.prompt_segments = reference_prompt.text_segments;
    record.n1 = reference_prompt.n1;
    record.n2 = reference_prompt.n2;
    record.n3 = reference_prompt.n3;
    record.n4 = reference_prompt.n4;

    LossSpec spec = config.loss;
    spec.lambda = config.lambda_override.value_or(compute_lambda(reference_prompt));

    // Frozen reference logits from the unperturbed embeddings.
    const Eigen::MatrixXd embeddings = ctx.model.embed(reference_prompt.tokens);
    const Eigen::MatrixXd reference_logits =
        ctx.model.forward_logits(embeddings, {0, reference_prompt.n4});
    const LossTargets targets = make_loss_targets(
        reference_logits, identity_alignment(reference_prompt), spec.ce_target);

    PerturbationState state =
        make_perturbation_state(embeddings, {reference_prompt.n1, reference_prompt.n2},
                                config.epsilon, config.epsilon_mode);

    for (int step = 0; step < config.steps; ++step) {
      const GradientResult grads = ctx.model.loss_gradient(state.perturbed, targets, spec, false);
      StepTrace trace;
      trace.loss = LossTrace{grads.bundle.l_c, grads.bundle.l_a, grads.bundle.lambda,
                             grads.bundle.l_opt, false};
      if (!grads.finite()) {
        trace.loss.skipped_nonfinite = true;
        record.steps.push_back(std::move(trace));
        continue;
      }
      pgd_step(state, grads.grad_embedding, config.alpha);
      record.steps.push_back(std::move(trace));
    }

    if (record.steps.size() > 1) {
      long monotone = 0;
      for (std::size_t i = 1; i < record.steps.size(); ++i) {
        if (record.steps[i].loss.l_opt >= record.steps[i - 1].loss.l_opt) ++monotone;
      }
      record.monotone_fraction =
          static_cast<double>(monotone) / static_cast<double>(record.steps.size() - 1);
    }
    const double identity = token_identity_rate(
        ctx.model, state, reference_prompt.question_tokens());
    if (identity >= 0.0) record.token_identity_rate = identity;
    if (config.store_delta) maybe_store_delta(state, ctx, record);

    // Final generation from the perturbed question prefix.
    Eigen::MatrixXd prefix(reference_prompt.n2 + static_cast<Eigen::Index>(base.scaffold.size()),
                           state.perturbed.cols());
    prefix.topRows(reference_prompt.n2) = state.perturbed.topRows(reference_prompt.n2);
    if (!base.scaffold.empty()) {
      prefix.bottomRows(static_cast<Eigen::Index>(base.scaffold.size())) =
          ctx.model.embed(base.scaffold);
    }
    DecodeParams final_decode = ctx.decode;
    final_decode.seed = rng::derive_seed(record.seed_example, "final-generation");
    const Generation final_gen = ctx.model.generate(prefix, final_decode);
    const SplitGeneration final_split = split_answer_cot(final_gen.text, example.task_kind);
    record.final_generation = make_generation_trace(final_gen, final_split, example);

    const Classification cls = classify_attacked_generation(
        final_split, example, base.split.cot_text, ctx.judge_reasoning, "final", record);
    if (cls.errored) {
      record.errored = true;
      record.error = cls.error;
    } else {
      record.outcome = cls.outcome;
    }
    return record;
  } catch (const std::exception& e) {
    record.errored = true;
    record.outcome.reset();
    record.error = e.what();
    return record;
  }
}

}  // namespace cotstress
