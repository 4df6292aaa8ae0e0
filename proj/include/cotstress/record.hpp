#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotstress/tokenizer.hpp"

namespace cotstress {

enum class Outcome { IncorrectBaseline, Wrong, Success, Unattackable };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct LossTrace {
  double l_c = 0.0;
  double l_a = 0.0;
  double lambda = 0.0;
  double l_opt = 0.0;
  bool skipped_nonfinite = false;
};

struct SwapTrace {
  long position = 0;  // absolute prompt coordinate
  TokenId previous_id = 0;
  TokenId candidate_id = 0;
  double score = 0.0;
  bool accepted = false;
};

struct StepTrace {
  LossTrace loss;
  std::vector<SwapTrace> swaps;
};

struct JudgeTrace {
  std::string judge;   // "J1" | "J2"
  std::string stage;   // "stage1" | "swap" | "final" | "transfer"
  int rating = -1;
  std::string parse_status;
  std::string raw;
  std::string model;
};

struct GenerationTrace {
  std::string text;
  std::string answer_text;
  std::string cot_text;
  bool parsed = false;
  bool correct = false;
};

/// Full trajectory of one attacked example, serialized as one JSONL object.
struct AttackRecord {
  std::string example_id;
  std::string dataset;
  std::string task_kind;     // "numeric" | "boolean"
  std::string ground_truth;  // canonical answer text
  std::string model_id;
  std::string attack;  // "token" | "embedding"
  std::string mode;
  std::uint64_t seed_global = 0;
  std::uint64_t seed_example = 0;
  nlohmann::json config;  // hyperparameter snapshot

  std::array<std::string, 4> prompt_segments;
  long n1 = 0, n2 = 0, n3 = 0, n4 = 0;

  std::string original_question;
  std::string perturbed_question;
  std::vector<TokenId> original_question_tokens;
  std::vector<TokenId> perturbed_question_tokens;
  std::vector<long> inserted_indices;  // absolute prompt coordinates

  GenerationTrace baseline;
  std::optional<GenerationTrace> stage1;
  std::vector<StepTrace> steps;
  std::optional<GenerationTrace> final_generation;
  std::vector<JudgeTrace> judges;

  std::optional<Outcome> outcome;
  bool errored = false;
  std::string error;

  std::optional<double> monotone_fraction;     // diagnostic, embedding attack
  std::optional<double> token_identity_rate;   // nearest-row audit
  std::optional<std::string> delta_path;
};

void to_json(nlohmann::json& j, const AttackRecord& r);
void from_json(const nlohmann::json& j, AttackRecord& r);

std::vector<AttackRecord> read_records_jsonl(const std::string& path);

/// Append-only record sink; every record is flushed as soon as it is written.
class RecordWriter {
 public:
  explicit RecordWriter(const std::string& path);
  void append(const AttackRecord& record);
  long written() const { return written_; }

 private:
  std::ofstream out_;
  std::mutex mutex_;
  long written_ = 0;
};

}  // namespace cotstress
