#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cotstress {

enum class TaskKind { Numeric, Boolean };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

/// Canonical answer value: a number or a truth value. Numbers compare equal
/// within 1e-6 after stripping currency symbols and digit-group commas.
struct NormalizedAnswer {
  TaskKind kind = TaskKind::Numeric;
  double number = 0.0;
  bool truth = false;

  static NormalizedAnswer numeric(double v) { return {TaskKind::Numeric, v, false}; }
  static NormalizedAnswer boolean(bool v) { return {TaskKind::Boolean, 0.0, v}; }

  bool equals(const NormalizedAnswer& other) const;
  std::string canonical_text() const;
};

/// Parse a free-form answer string ("5", "$21.95", "yes") into a value.
std::optional<NormalizedAnswer> parse_answer_value(std::string_view text, TaskKind kind);

struct ExtractedAnswer {
  NormalizedAnswer value;
  std::size_t marker_begin = 0;  // start of the "the answer is" marker
  std::size_t value_end = 0;     // one past the parsed value (and its sentence stop, if any)
};

/// Find the first "The answer is <v>" pattern and normalize the value.
/// Returns nullopt when no parseable answer is present; callers treat that
/// as an incorrect answer.
std::optional<ExtractedAnswer> extract_answer(std::string_view generation, TaskKind kind);

struct SplitGeneration {
  bool parsed = false;
  std::string answer_text;  // the answer sentence, e.g. "The answer is 5."
  std::string cot_text;     // everything after the answer sentence
  NormalizedAnswer value;
};

/// Split an answer-first generation into its answer sentence and the
/// reasoning that follows it.
SplitGeneration split_answer_cot(std::string_view generation, TaskKind kind);

}  // namespace cotstress
