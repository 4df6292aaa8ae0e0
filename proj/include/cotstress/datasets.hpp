#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotstress/answer.hpp"
#include "cotstress/prompt.hpp"

namespace cotstress {

struct BenchmarkExample {
  std::string id;
  std::string question;
  NormalizedAnswer ground_truth;
  std::string dataset;  // "singleeq" | "gsm8k" | "strategyqa" | "synthetic"
  TaskKind task_kind = TaskKind::Numeric;
};

struct SampleSpec {
  bool all = true;
  int count = 0;
  std::uint64_t seed = 0;

  static SampleSpec everything() { return {}; }
  static SampleSpec sample(int count, std::uint64_t seed) { return {false, count, seed}; }
};

TaskKind dataset_task_kind(const std::string& dataset);

/// Canonical JSONL: one object per line with keys id, question, answer,
/// dataset. Throws DataError on missing files or schema violations.
std::vector<BenchmarkExample> read_canonical_jsonl(const std::string& path);
void write_canonical_jsonl(const std::string& path, const std::vector<BenchmarkExample>& examples);

/// Loads a benchmark by name. Files live at {data_dir}/{name}_{split}.jsonl.
/// The synthetic dataset is generated, not read. Sampling picks a fixed
/// seeded subset, preserving the original order.
std::vector<BenchmarkExample> load_dataset(const std::string& name, const std::string& split,
                                           const SampleSpec& sample_spec,
                                           const std::string& data_dir);

/// Deterministic offline arithmetic questions for smoke runs and tests.
std::vector<BenchmarkExample> synthetic_examples(int count, std::uint64_t seed);

/// Exemplar packs as JSONL with keys question, answer, cot. Known datasets
/// carry fixed pack sizes (8 math, 6 commonsense); a mismatch is an error.
std::vector<Exemplar> load_exemplars(const std::string& dataset, const std::string& dir);

/// Upstream-format converters feeding the canonical schema.
void ingest_gsm8k(const std::string& input_path, const std::string& output_path);
void ingest_singleeq(const std::string& input_path, const std::string& output_path);
void ingest_strategyqa(const std::string& input_path, const std::string& output_path);

}  // namespace cotstress
