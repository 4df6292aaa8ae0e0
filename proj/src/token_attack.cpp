#include "cotstress/token_attack.hpp"

#include <algorithm>
#include <cmath>

#include "cotstress/errors.hpp"

namespace cotstress {

std::string_view to_string(TokenAttackMode m) {
  switch (m) {
    case TokenAttackMode::Full:
      return "full";
    case TokenAttackMode::RandomInsertOnly:
      return "random-insert-only";
    case TokenAttackMode::GcgSuffix:
      return "gcg-suffix";
    case TokenAttackMode::RandomLocations:
      return "random-locations";
    case TokenAttackMode::CotOnly:
      return "cot-only";
  }
  return "full";
}

TokenAttackMode token_mode_from_string(std::string_view s) {
  if (s == "full") return TokenAttackMode::Full;
  if (s == "random-insert-only") return TokenAttackMode::RandomInsertOnly;
  if (s == "gcg-suffix") return TokenAttackMode::GcgSuffix;
  if (s == "random-locations") return TokenAttackMode::RandomLocations;
  if (s == "cot-only") return TokenAttackMode::CotOnly;
  throw ConfigError("unknown token attack mode: " + std::string(s));
}

std::string_view to_string(SwapPolicy p) {
  return p == SwapPolicy::Cumulative ? "cumulative" : "first-accept";
}

SwapPolicy swap_policy_from_string(std::string_view s) {
  if (s == "cumulative") return SwapPolicy::Cumulative;
  if (s == "first-accept") return SwapPolicy::FirstAccept;
  throw ConfigError("unknown swap policy: " + std::string(s));
}

Eigen::Index TokenAttackConfig::selection_count(double replace_ratio,
                                                Eigen::Index inserted_count) {
  if (inserted_count <= 0) return 0;
  const auto floored =
      static_cast<Eigen::Index>(std::floor(replace_ratio * static_cast<double>(inserted_count)));
  return std::max<Eigen::Index>(Eigen::Index{1}, std::min(floored, inserted_count));
}

InsertionResult insert_random_tokens(std::span<const TokenId> question_tokens,
                                     double insert_ratio, std::uint64_t seed,
                                     const std::vector<TokenId>& pool) {
  if (question_tokens.empty()) throw PromptError("insert_random_tokens: empty question");
  if (pool.empty()) throw ConfigError("insert_random_tokens: empty sampling pool");

  const auto insert_count = static_cast<Eigen::Index>(
      std::llround(insert_ratio * static_cast<double>(question_tokens.size())));

  struct Slot {
    TokenId id;
    bool inserted;
  };
  std::vector<Slot> slots;
  slots.reserve(question_tokens.size() + static_cast<std::size_t>(insert_count));
  for (TokenId id : question_tokens) slots.push_back({id, false});

  rng::Rng r(rng::derive_seed(seed, "token-insertion"));
  for (Eigen::Index k = 0; k < insert_count; ++k) {
    const auto pos = static_cast<std::size_t>(
        r.uniform_int(0, static_cast<std::int64_t>(slots.size())));
    const TokenId id =
        pool[static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    slots.insert(slots.begin() + static_cast<std::ptrdiff_t>(pos), {id, true});
  }

  InsertionResult out;
  out.tokens.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    out.tokens.push_back(slots[i].id);
    if (slots[i].inserted) out.inserted_indices.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

CandidateSet rank_candidates(const Eigen::MatrixXd& gradient,
                             std::span<const TokenId> current_ids,
                             const std::vector<Eigen::Index>& inserted_indices,
                             Eigen::Index selection_count, const Tokenizer& tokenizer,
                             bool random_locations, rng::Rng* rng, int pool_cap) {
  CandidateSet out;
  if (inserted_indices.empty() || selection_count <= 0) return out;
  if (gradient.rows() != static_cast<Eigen::Index>(current_ids.size())) {
    throw std::invalid_argument("rank_candidates: gradient rows must cover every position");
  }

  struct Scored {
    Eigen::Index position;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(inserted_indices.size());
  for (Eigen::Index pos : inserted_indices) {
    if (pos < 0 || pos >= gradient.rows()) {
      throw std::invalid_argument("rank_candidates: inserted index out of range");
    }
    scored.push_back({pos, gradient(pos, current_ids[static_cast<std::size_t>(pos)])});
  }

  const auto take = std::min<std::size_t>(static_cast<std::size_t>(selection_count),
                                          scored.size());
  if (random_locations) {
    if (rng == nullptr) throw ConfigError("rank_candidates: random mode needs a generator");
    for (std::size_t k = 0; k < take; ++k) {
      const auto j = static_cast<std::size_t>(
          rng->uniform_int(static_cast<std::int64_t>(k),
                           static_cast<std::int64_t>(scored.size()) - 1));
      std::swap(scored[k], scored[j]);
    }
    scored.resize(take);
  } else {
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.position < b.position;
    });
    scored.resize(take);
  }

  for (const Scored& s : scored) {
    // Highest-gradient replacement, skipping the incumbent and anything that
    // cannot stand in readable text.
    const TokenId incumbent = current_ids[static_cast<std::size_t>(s.position)];
    std::vector<Eigen::Index> order(static_cast<std::size_t>(gradient.cols()));
    for (std::size_t v = 0; v < order.size(); ++v) order[v] = static_cast<Eigen::Index>(v);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return gradient(s.position, a) > gradient(s.position, b);
    });
    const std::size_t limit =
        pool_cap > 0 ? std::min<std::size_t>(order.size(), static_cast<std::size_t>(pool_cap))
                     : order.size();
    std::optional<TokenId> replacement;
    for (std::size_t v = 0; v < limit; ++v) {
      const auto id = static_cast<TokenId>(order[v]);
      if (id == incumbent) continue;
      if (!tokenizer.is_insertable(id)) continue;
      replacement = id;
      break;
    }
    if (!replacement) continue;
    out.ranked.push_back(Candidate{s.position, *replacement, s.score});
  }
  return out;
}

std::vector<SwapTrace> swap_with_gate(const CandidateSet& candidates,
                                      std::vector<TokenId>& question_tokens,
                                      Eigen::Index question_begin,
                                      const std::string& original_question, Judge* judge,
                                      SwapPolicy policy, const Tokenizer& tokenizer,
                                      std::vector<JudgeTrace>* judge_log) {
  std::vector<SwapTrace> trace;
  for (const Candidate& c : candidates.ranked) {
    const auto rel = static_cast<std::size_t>(c.position - question_begin);
    if (rel >= question_tokens.size()) {
      throw std::invalid_argument("swap_with_gate: candidate outside the question span");
    }
    SwapTrace swap;
    swap.position = static_cast<long>(c.position);
    swap.previous_id = question_tokens[rel];
    swap.candidate_id = c.replacement;
    swap.score = c.score;

    std::vector<TokenId> proposal = question_tokens;
    proposal[rel] = c.replacement;

    bool accept = true;
    if (judge != nullptr) {
      const std::string proposal_text = tokenizer.decode(proposal);
      JudgeVerdict verdict;
      try {
        verdict = judge->evaluate(original_question, proposal_text);
      } catch (const TransportError& e) {
        verdict.parse_status = ParseStatus::Failed;
        verdict.raw_text = e.what();
        verdict.judge_id = JudgeId::J2Semantic;
      }
      if (judge_log != nullptr) {
        judge_log->push_back(JudgeTrace{"J2", "swap", verdict.rating,
                                        std::string(to_string(verdict.parse_status)),
                                        verdict.raw_text, verdict.model_name});
      }
      accept = !verdict.failed() && verdict.rating == 1;
    }

    swap.accepted = accept;
    trace.push_back(swap);
    if (accept) {
      question_tokens = std::move(proposal);
      if (policy == SwapPolicy::FirstAccept) break;
    }
  }
  return trace;
}

AttackRecord run_token_attack(AttackContext& ctx, const BenchmarkExample& example,
                              const TokenAttackConfig& config) {
  AttackRecord record;
  record.example_id = example.id;
  record.dataset = example.dataset;
  record.task_kind = std::string(to_string(example.task_kind));
  record.ground_truth = example.ground_truth.canonical_text();
  record.model_id = ctx.model.backend_id();
  record.attack = "token";
  record.mode = std::string(to_string(config.mode));
  record.seed_global = ctx.global_seed;
  record.seed_example = example_seed(ctx.global_seed, example.id);
  record.config = {
      {"insert_ratio", config.insert_ratio},
      {"replace_ratio", config.replace_ratio},
      {"steps", config.steps},
      {"swap_policy", std::string(to_string(config.swap_policy))},
      {"suffix_tokens", config.suffix_tokens},
      {"candidate_pool", config.candidate_pool},
      {"ce_target", std::string(to_string(config.loss.ce_target))},
      {"reduction", std::string(to_string(config.loss.reduction))},
      {"sign_convention", std::string(to_string(config.loss.sign_convention))},
  };
  record.original_question = example.question;

  const Tokenizer& tokenizer = ctx.model.tokenizer();

  try {
    // Baseline: answer-first generation from the unperturbed question.
    BaselineResult base = run_baseline(ctx, example, record.seed_example);
    record.baseline = make_generation_trace(base.generation, base.split, example);
    record.original_question_tokens.assign(base.question_prompt.question_tokens().begin(),
                                           base.question_prompt.question_tokens().end());
    if (!base.correct) {
      record.outcome = Outcome::IncorrectBaseline;
      return record;
    }

    // Reference prompt carries the model's own answer and reasoning.
    const SegmentedPrompt reference_prompt = build_segmented_prompt(
        ctx.exemplars, example.question, base.split.answer_text, base.split.cot_text,
        tokenizer, ctx.prompt_template);
    record.prompt_segments = reference_prompt.text_segments;
    record.n1 = reference_prompt.n1;
    record.n2 = reference_prompt.n2;
    record.n3 = reference_prompt.n3;
    record.n4 = reference_prompt.n4;

    // Stage 1: random insertion (or an appended suffix span).
    const std::vector<TokenId> pool = tokenizer.insertable_ids();
    InsertionResult inserted;
    if (config.mode == TokenAttackMode::GcgSuffix) {
      inserted.tokens.assign(record.original_question_tokens.begin(),
                             record.original_question_tokens.end());
      rng::Rng r(rng::derive_seed(record.seed_example, "suffix-init"));
      for (int k = 0; k < config.suffix_tokens; ++k) {
        inserted.inserted_indices.push_back(static_cast<Eigen::Index>(inserted.tokens.size()));
        inserted.tokens.push_back(pool[static_cast<std::size_t>(
            r.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
      }
    } else {
      inserted = insert_random_tokens(record.original_question_tokens, config.insert_ratio,
                                      record.seed_example, pool);
    }

    std::vector<TokenId> question = inserted.tokens;
    for (Eigen::Index rel : inserted.inserted_indices) {
      record.inserted_indices.push_back(static_cast<long>(reference_prompt.n1 + rel));
    }

    // Post-insertion generation and early exit checks.
    const SegmentedPrompt stage1_prompt =
        splice_question(base.question_prompt, question, tokenizer);
    std::vector<TokenId> prefix = stage1_prompt.tokens;
    prefix.insert(prefix.end(), base.scaffold.begin(), base.scaffold.end());
    DecodeParams stage1_decode = ctx.decode;
    stage1_decode.seed = rng::derive_seed(record.seed_example, "stage1-generation");
    const Generation stage1_gen = ctx.model.generate(prefix, stage1_decode);
    const SplitGeneration stage1_split = split_answer_cot(stage1_gen.text, example.task_kind);
    record.stage1 = make_generation_trace(stage1_gen, stage1_split, example);

    auto finish = [&](const SplitGeneration& split, const Classification& cls) {
      record.perturbed_question = tokenizer.decode(question);
      record.perturbed_question_tokens = question;
      if (cls.errored) {
        record.errored = true;
        record.error = cls.error;
      } else {
        record.outcome = cls.outcome;
      }
      (void)split;
    };

    const Classification stage1_cls = classify_attacked_generation(
        stage1_split, example, base.split.cot_text, ctx.judge_reasoning, "stage1", record);
    const bool stage1_stops = stage1_cls.errored ||
                              stage1_cls.outcome == Outcome::Wrong ||
                              stage1_cls.outcome == Outcome::Success;
    if (stage1_stops || config.mode == TokenAttackMode::RandomInsertOnly) {
      record.final_generation = record.stage1;
      finish(stage1_split, stage1_cls);
      return record;
    }

    // Stage 2: gradient-informed replacement. The optimized prompt keeps the
    // baseline answer and the post-insertion reasoning as its continuation.
    if (!inserted.inserted_indices.empty() && config.steps > 0) {
      LossSpec spec = config.loss;
      spec.cot_only = spec.cot_only || config.mode == TokenAttackMode::CotOnly;
      spec.lambda = config.lambda_override.value_or(compute_lambda(reference_prompt));

      const Eigen::MatrixXd reference_logits =
          ctx.model.forward_logits(reference_prompt.tokens, {0, reference_prompt.n4});

      const SegmentedPrompt loop_base =
          build_segmented_prompt(ctx.exemplars, example.question, base.split.answer_text,
                                 stage1_split.cot_text, tokenizer, ctx.prompt_template);
      SegmentedPrompt perturbed_prompt = splice_question(loop_base, question, tokenizer);
      const LossTargets targets = make_loss_targets(
          reference_logits, align_prompts(reference_prompt, perturbed_prompt), spec.ce_target);

      const Eigen::Index t_k = TokenAttackConfig::selection_count(
          config.replace_ratio,
          static_cast<Eigen::Index>(inserted.inserted_indices.size()));
      std::vector<Eigen::Index> inserted_abs;
      for (long idx : record.inserted_indices) inserted_abs.push_back(idx);

      rng::Rng location_rng(rng::derive_seed(record.seed_example, "random-locations"));

      for (int step = 0; step < config.steps; ++step) {
        perturbed_prompt = splice_question(loop_base, question, tokenizer);
        const GradientResult grads =
            ctx.model.loss_gradient(perturbed_prompt.tokens, targets, spec, true);

        StepTrace step_trace;
        step_trace.loss = LossTrace{grads.bundle.l_c, grads.bundle.l_a, grads.bundle.lambda,
                                    grads.bundle.l_opt, false};
        if (!grads.finite()) {
          step_trace.loss.skipped_nonfinite = true;
          record.steps.push_back(std::move(step_trace));
          continue;
        }

        const bool random_locations = config.mode == TokenAttackMode::RandomLocations;
        const Eigen::Index count = config.mode == TokenAttackMode::GcgSuffix ? 1 : t_k;
        const int pool_cap =
            config.mode == TokenAttackMode::GcgSuffix ? config.candidate_pool : 0;
        const CandidateSet candidates =
            rank_candidates(grads.grad_onehot, perturbed_prompt.tokens, inserted_abs, count,
                            tokenizer, random_locations, &location_rng, pool_cap);

        Judge* gate =
            config.mode == TokenAttackMode::GcgSuffix ? nullptr : ctx.judge_semantic;
        step_trace.swaps =
            swap_with_gate(candidates, question, reference_prompt.n1, example.question, gate,
                           config.swap_policy, tokenizer, &record.judges);
        record.steps.push_back(std::move(step_trace));
      }
    }

    // Final generation from the optimized question.
    const SegmentedPrompt final_prompt =
        splice_question(base.question_prompt, question, tokenizer);
    std::vector<TokenId> final_prefix = final_prompt.tokens;
    final_prefix.insert(final_prefix.end(), base.scaffold.begin(), base.scaffold.end());
    DecodeParams final_decode = ctx.decode;
    final_decode.seed = rng::derive_seed(record.seed_example, "final-generation");
    const Generation final_gen = ctx.model.generate(final_prefix, final_decode);
    const SplitGeneration final_split = split_answer_cot(final_gen.text, example.task_kind);
    record.final_generation = make_generation_trace(final_gen, final_split, example);

    const Classification final_cls = classify_attacked_generation(
        final_split, example, base.split.cot_text, ctx.judge_reasoning, "final", record);
    finish(final_split, final_cls);
    return record;
  } catch (const std::exception& e) {
    record.errored = true;
    record.outcome.reset();
    record.error = e.what();
    return record;
  }
}

}  // namespace cotstress
