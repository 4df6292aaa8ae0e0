#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotstress/tokenizer.hpp"

namespace cotstress {

/// One in-context example: question, formatted answer sentence, reasoning.
struct Exemplar {
  std::string question;
  std::string answer;  // "The answer is <v>."
  std::string cot;
};

enum class ExemplarOrder {
  AnswerFirst,  // question, answer, reasoning — matches answer-first generation
  CotFirst,     // question, reasoning, answer
};

/// Text joiners around the four prompt segments. `answer_sep` doubles as the
/// generation scaffold appended after the question when decoding starts.
struct PromptTemplate {
  std::string answer_sep = "\n";
  std::string cot_sep = " ";
  std::string exemplar_sep = "\n\n";
  ExemplarOrder exemplar_order = ExemplarOrder::AnswerFirst;

  std::string render_exemplar(const Exemplar& e) const;
};

/// Token sequence split into four segments by boundary offsets:
///   [0,n1)  in-context block   [n1,n2) question
///   [n2,n3) answer             [n3,n4) reasoning
/// with 0 <= n1 <= n2 <= n3 <= n4 == tokens.size().
struct SegmentedPrompt {
  std::vector<TokenId> tokens;
  Eigen::Index n1 = 0, n2 = 0, n3 = 0, n4 = 0;
  std::array<std::string, 4> text_segments;

  Eigen::Index question_length() const { return n2 - n1; }
  std::span<const TokenId> question_tokens() const {
    return std::span<const TokenId>(tokens).subspan(static_cast<std::size_t>(n1),
                                                    static_cast<std::size_t>(n2 - n1));
  }
  std::string full_text() const;
  void check_invariants() const;
};

/// Builds the segmented prompt from exemplars and the current example. Empty
/// answer/cot leave their segments empty (n2 == n3 and/or n3 == n4). Throws
/// PromptError when any segment fails the tokenizer round-trip.
SegmentedPrompt build_segmented_prompt(const std::vector<Exemplar>& exemplars,
                                       std::string_view question, std::string_view answer,
                                       std::string_view cot, const Tokenizer& tokenizer,
                                       const PromptTemplate& tmpl = {});

/// Replaces the question span with new tokens, shifting n2..n4 by the length
/// delta. All other spans are token-identical. Throws on empty replacement.
SegmentedPrompt splice_question(const SegmentedPrompt& prompt,
                                std::span<const TokenId> new_question_tokens,
                                const Tokenizer& tokenizer);

}  // namespace cotstress
