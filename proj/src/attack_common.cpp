#include "cotstress/attack_common.hpp"

#include "cotstress/rng.hpp"

namespace cotstress {

std::uint64_t example_seed(std::uint64_t global_seed, const std::string& example_id) {
  return rng::derive_seed(global_seed, example_id);
}

BaselineResult run_baseline(AttackContext& ctx, const BenchmarkExample& example,
                            std::uint64_t seed) {
  BaselineResult out;
  out.question_prompt = build_segmented_prompt(ctx.exemplars, example.question, "", "",
                                               ctx.model.tokenizer(), ctx.prompt_template);
  out.scaffold = ctx.model.tokenizer().encode(ctx.prompt_template.answer_sep);

  std::vector<TokenId> prefix = out.question_prompt.tokens;
  prefix.insert(prefix.end(), out.scaffold.begin(), out.scaffold.end());

  DecodeParams params = ctx.decode;
  params.seed = rng::derive_seed(seed, "baseline-generation");
  out.generation = ctx.model.generate(prefix, params);
  out.split = split_answer_cot(out.generation.text, example.task_kind);
  out.correct = out.split.parsed && out.split.value.equals(example.ground_truth);
  return out;
}

GenerationTrace make_generation_trace(const Generation& gen, const SplitGeneration& split,
                                      const BenchmarkExample& example) {
  GenerationTrace trace;
  trace.text = gen.text;
  trace.parsed = split.parsed;
  trace.answer_text = split.answer_text;
  trace.cot_text = split.cot_text;
  trace.correct = split.parsed && split.value.equals(example.ground_truth);
  return trace;
}

Classification classify_attacked_generation(const SplitGeneration& split,
                                            const BenchmarkExample& example,
                                            const std::string& reference_cot, Judge& judge,
                                            const std::string& stage, AttackRecord& record) {
  Classification result;
  const bool answer_survives = split.parsed && split.value.equals(example.ground_truth);
  if (!answer_survives) {
    result.outcome = Outcome::Wrong;
    return result;
  }
  // A generation can carry an answer with no reasoning at all; give the judge
  // a marker instead of an empty slot.
  static const std::string kEmpty = "(no reasoning produced)";
  const std::string& reference = reference_cot.empty() ? kEmpty : reference_cot;
  const std::string& candidate = split.cot_text.empty() ? kEmpty : split.cot_text;
  const JudgeVerdict verdict = judge.evaluate(reference, candidate, /*parse_retries=*/2);
  record.judges.push_back(JudgeTrace{"J1", stage, verdict.rating,
                                     std::string(to_string(verdict.parse_status)),
                                     verdict.raw_text, verdict.model_name});
  if (verdict.failed()) {
    result.errored = true;
    result.error = "reasoning judge failed at " + stage;
    return result;
  }
  result.outcome = verdict.rating == 0 ? Outcome::Success : Outcome::Unattackable;
  return result;
}

}  // namespace cotstress
