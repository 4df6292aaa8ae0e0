#pragma once

#include <optional>
#include <vector>

#include "cotstress/attack_common.hpp"
#include "cotstress/rng.hpp"

namespace cotstress {

enum class TokenAttackMode { Full, RandomInsertOnly, GcgSuffix, RandomLocations, CotOnly };
enum class SwapPolicy { Cumulative, FirstAccept };

std::string_view to_string(TokenAttackMode m);
TokenAttackMode token_mode_from_string(std::string_view s);
std::string_view to_string(SwapPolicy p);
SwapPolicy swap_policy_from_string(std::string_view s);

struct TokenAttackConfig {
  double insert_ratio = 0.2;   // fraction of the question length inserted
  double replace_ratio = 0.5;  // fraction of insertions swapped per step
  int steps = 5;
  std::uint64_t rng_seed = 0;
  TokenAttackMode mode = TokenAttackMode::Full;
  SwapPolicy swap_policy = SwapPolicy::Cumulative;
  int suffix_tokens = 20;       // appended span length in suffix mode
  int candidate_pool = 256;     // per-position replacement pool in suffix mode
  std::optional<double> lambda_override;
  LossSpec loss;  // lambda filled per example unless overridden

  /// Number of positions swapped per step: floor(k * inserted), at least 1.
  static Eigen::Index selection_count(double replace_ratio, Eigen::Index inserted_count);
};

struct InsertionResult {
  std::vector<TokenId> tokens;                 // question with insertions
  std::vector<Eigen::Index> inserted_indices;  // question-relative positions
};

/// Stage 1: round(a * len) uniformly placed random tokens drawn from `pool`.
/// The original tokens remain a subsequence.
InsertionResult insert_random_tokens(std::span<const TokenId> question_tokens, double insert_ratio,
                                     std::uint64_t seed, const std::vector<TokenId>& pool);

struct Candidate {
  Eigen::Index position = 0;  // absolute prompt coordinate
  TokenId replacement = 0;
  double score = 0.0;
};

struct CandidateSet {
  std::vector<Candidate> ranked;  // descending score, ties by lowest index
};

/// Stage 2 selection: scores are the gradient at each inserted position's
/// current token; the top selection_count positions are kept (random mode
/// draws them uniformly instead); the replacement per position is the
/// highest-gradient vocabulary entry that is insertable and not the
/// incumbent, searched within the first `pool_cap` entries when positive.
CandidateSet rank_candidates(const Eigen::MatrixXd& gradient,
                             std::span<const TokenId> current_ids,
                             const std::vector<Eigen::Index>& inserted_indices,
                             Eigen::Index selection_count, const Tokenizer& tokenizer,
                             bool random_locations = false, rng::Rng* rng = nullptr,
                             int pool_cap = 0);

/// Applies candidates under the semantic gate. Cumulative policy keeps every
/// accepted replacement; first-accept returns after one. A null judge accepts
/// everything; a failed verdict rejects the swap.
std::vector<SwapTrace> swap_with_gate(const CandidateSet& candidates,
                                      std::vector<TokenId>& question_tokens,
                                      Eigen::Index question_begin,
                                      const std::string& original_question, Judge* judge,
                                      SwapPolicy policy, const Tokenizer& tokenizer,
                                      std::vector<JudgeTrace>* judge_log);

AttackRecord run_token_attack(AttackContext& ctx, const BenchmarkExample& example,
                              const TokenAttackConfig& config);

}  // namespace cotstress
