#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotstress/datasets.hpp"
#include "cotstress/judge.hpp"
#include "cotstress/model.hpp"
#include "cotstress/record.hpp"

namespace cotstress {

/// Everything an attack run needs besides the example itself. The gateway is
/// owned elsewhere; one context must not be shared across threads.
struct AttackContext {
  ModelGateway& model;
  Judge& judge_reasoning;           // J1
  Judge* judge_semantic = nullptr;  // J2; token attack only
  std::vector<Exemplar> exemplars;
  PromptTemplate prompt_template;
  DecodeParams decode;
  std::uint64_t global_seed = 0;
  std::optional<std::string> delta_dir;  // embedding deltas, when set
};

struct BaselineResult {
  SegmentedPrompt question_prompt;  // exemplars + question, empty answer/cot
  std::vector<TokenId> scaffold;    // tokens appended before decoding starts
  Generation generation;
  SplitGeneration split;
  bool correct = false;
};

/// Generates the unperturbed answer and reasoning and checks them against the
/// ground truth. An unparseable generation counts as incorrect.
BaselineResult run_baseline(AttackContext& ctx, const BenchmarkExample& example,
                            std::uint64_t example_seed);

GenerationTrace make_generation_trace(const Generation& gen, const SplitGeneration& split,
                                      const BenchmarkExample& example);

/// Shared post-attack classification: a flipped or unparseable answer is
/// Wrong; a surviving answer with reasoning judged incorrect is Success;
/// otherwise the example is Unattackable. A failed reasoning verdict marks
/// the record errored instead.
struct Classification {
  std::optional<Outcome> outcome;
  bool errored = false;
  std::string error;
};

Classification classify_attacked_generation(const SplitGeneration& split,
                                            const BenchmarkExample& example,
                                            const std::string& reference_cot, Judge& judge,
                                            const std::string& stage, AttackRecord& record);

std::uint64_t example_seed(std::uint64_t global_seed, const std::string& example_id);

}  // namespace cotstress
