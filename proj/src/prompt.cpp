#include "cotstress/prompt.hpp"

#include "cotstress/errors.hpp"

namespace cotstress {
namespace {

std::vector<TokenId> encode_checked(const Tokenizer& tokenizer, std::string_view text,
                                    const char* what) {
  std::vector<TokenId> tokens = tokenizer.encode(text);
  if (tokenizer.decode(tokens) != text) {
    throw PromptError(std::string("tokenizer round-trip failed for ") + what);
  }
  return tokens;
}

}  // namespace

std::string PromptTemplate::render_exemplar(const Exemplar& e) const {
  if (exemplar_order == ExemplarOrder::AnswerFirst) {
    return e.question + answer_sep + e.answer + cot_sep + e.cot + exemplar_sep;
  }
  return e.question + answer_sep + e.cot + cot_sep + e.answer + exemplar_sep;
}

std::string SegmentedPrompt::full_text() const {
  return text_segments[0] + text_segments[1] + text_segments[2] + text_segments[3];
}

void SegmentedPrompt::check_invariants() const {
  if (!(0 <= n1 && n1 <= n2 && n2 <= n3 && n3 <= n4)) {
    throw PromptError("segment boundaries out of order");
  }
  if (n4 != static_cast<Eigen::Index>(tokens.size())) {
    throw PromptError("n4 does not equal token count");
  }
}

SegmentedPrompt build_segmented_prompt(const std::vector<Exemplar>& exemplars,
                                       std::string_view question, std::string_view answer,
                                       std::string_view cot, const Tokenizer& tokenizer,
                                       const PromptTemplate& tmpl) {
  if (question.empty()) throw PromptError("question must be non-empty");

  SegmentedPrompt out;
  std::string icl;
  for (const Exemplar& e : exemplars) icl += tmpl.render_exemplar(e);
  out.text_segments[0] = icl;
  out.text_segments[1] = std::string(question);
  out.text_segments[2] = answer.empty() ? std::string() : tmpl.answer_sep + std::string(answer);
  out.text_segments[3] = cot.empty() ? std::string() : tmpl.cot_sep + std::string(cot);

  for (int seg = 0; seg < 4; ++seg) {
    const std::string& text = out.text_segments[static_cast<std::size_t>(seg)];
    std::vector<TokenId> ids = encode_checked(tokenizer, text, "prompt segment");
    out.tokens.insert(out.tokens.end(), ids.begin(), ids.end());
    const auto boundary = static_cast<Eigen::Index>(out.tokens.size());
    if (seg == 0) out.n1 = boundary;
    if (seg == 1) out.n2 = boundary;
    if (seg == 2) out.n3 = boundary;
    if (seg == 3) out.n4 = boundary;
  }
  out.check_invariants();
  return out;
}

SegmentedPrompt splice_question(const SegmentedPrompt& prompt,
                                std::span<const TokenId> new_question_tokens,
                                const Tokenizer& tokenizer) {
  prompt.check_invariants();
  if (new_question_tokens.empty()) throw PromptError("spliced question must be non-empty");

  SegmentedPrompt out;
  out.tokens.reserve(prompt.tokens.size() + new_question_tokens.size());
  out.tokens.insert(out.tokens.end(), prompt.tokens.begin(), prompt.tokens.begin() + prompt.n1);
  out.tokens.insert(out.tokens.end(), new_question_tokens.begin(), new_question_tokens.end());
  out.tokens.insert(out.tokens.end(), prompt.tokens.begin() + prompt.n2, prompt.tokens.end());

  const Eigen::Index delta =
      static_cast<Eigen::Index>(new_question_tokens.size()) - (prompt.n2 - prompt.n1);
  out.n1 = prompt.n1;
  out.n2 = prompt.n2 + delta;
  out.n3 = prompt.n3 + delta;
  out.n4 = prompt.n4 + delta;
  out.text_segments = prompt.text_segments;
  out.text_segments[1] = tokenizer.decode(new_question_tokens);
  out.check_invariants();
  return out;
}

}  // namespace cotstress
