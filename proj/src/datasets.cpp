#include "cotstress/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cotstress/errors.hpp"
#include "cotstress/rng.hpp"

namespace cotstress {

using nlohmann::json;

namespace {

json parse_line(const std::string& line, const std::string& path, int lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

NormalizedAnswer answer_from_json(const json& value, TaskKind kind, const std::string& where) {
  if (kind == TaskKind::Boolean) {
    if (value.is_boolean()) return NormalizedAnswer::boolean(value.get<bool>());
    if (value.is_string()) {
      auto parsed = parse_answer_value(value.get<std::string>(), kind);
      if (parsed) return *parsed;
    }
    throw DataError(where + ": answer is not a boolean");
  }
  if (value.is_number()) return NormalizedAnswer::numeric(value.get<double>());
  if (value.is_string()) {
    auto parsed = parse_answer_value(value.get<std::string>(), kind);
    if (parsed) return *parsed;
  }
  throw DataError(where + ": answer is not a number");
}

int expected_exemplar_count(const std::string& dataset) {
  if (dataset == "gsm8k" || dataset == "singleeq") return 8;
  if (dataset == "strategyqa") return 6;
  return -1;  // unconstrained
}

int expected_split_size(const std::string& dataset, const std::string& split) {
  if (split != "test") return -1;
  if (dataset == "singleeq") return 508;
  if (dataset == "gsm8k") return 1319;
  return -1;
}

}  // namespace

TaskKind dataset_task_kind(const std::string& dataset) {
  return dataset == "strategyqa" ? TaskKind::Boolean : TaskKind::Numeric;
}

std::vector<BenchmarkExample> read_canonical_jsonl(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<BenchmarkExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    BenchmarkExample e;
    const std::string where = path + ":" + std::to_string(lineno);
    try {
      e.id = j.at("id").get<std::string>();
      e.question = j.at("question").get<std::string>();
      e.dataset = j.at("dataset").get<std::string>();
    } catch (const json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    }
    e.task_kind = dataset_task_kind(e.dataset);
    e.ground_truth = answer_from_json(j.at("answer"), e.task_kind, where);
    out.push_back(std::move(e));
  }
  // Ids must be unique within a dataset file.
  std::vector<std::string> ids;
  ids.reserve(out.size());
  for (const auto& e : out) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw DataError(path + ": duplicate example ids");
  }
  return out;
}

void write_canonical_jsonl(const std::string& path,
                           const std::vector<BenchmarkExample>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : examples) {
    json j;
    j["id"] = e.id;
    j["question"] = e.question;
    j["dataset"] = e.dataset;
    if (e.task_kind == TaskKind::Boolean) {
      j["answer"] = e.ground_truth.truth;
    } else {
      j["answer"] = e.ground_truth.number;
    }
    out << j.dump() << '\n';
  }
}

std::vector<BenchmarkExample> load_dataset(const std::string& name, const std::string& split,
                                           const SampleSpec& sample_spec,
                                           const std::string& data_dir) {
  std::vector<BenchmarkExample> all;
  if (name == "synthetic") {
    const int count = sample_spec.all ? 50 : sample_spec.count;
    return synthetic_examples(count, sample_spec.seed);
  }
  all = read_canonical_jsonl(data_dir + "/" + name + "_" + split + ".jsonl");

  const int expected = expected_split_size(name, split);
  if (expected > 0 && static_cast<int>(all.size()) != expected) {
    std::cerr << "warning: " << name << "/" << split << " has " << all.size()
              << " examples; full split is " << expected << "\n";
  }
  if (name == "gsm8k") {
    for (const auto& e : all) {
      if (e.task_kind != TaskKind::Numeric) throw DataError("gsm8k answers must be numeric");
    }
  }
  if (sample_spec.all || static_cast<int>(all.size()) <= sample_spec.count) return all;

  // Seeded partial Fisher-Yates over indices, then restore original order.
  std::vector<std::size_t> indices(all.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  rng::Rng r(rng::derive_seed(sample_spec.seed, name + "/" + split));
  for (int k = 0; k < sample_spec.count; ++k) {
    const auto j = static_cast<std::size_t>(
        r.uniform_int(k, static_cast<std::int64_t>(indices.size()) - 1));
    std::swap(indices[static_cast<std::size_t>(k)], indices[j]);
  }
  indices.resize(static_cast<std::size_t>(sample_spec.count));
  std::sort(indices.begin(), indices.end());

  std::vector<BenchmarkExample> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(all[idx]);
  return out;
}

std::vector<BenchmarkExample> synthetic_examples(int count, std::uint64_t seed) {
  std::vector<BenchmarkExample> out;
  out.reserve(static_cast<std::size_t>(count));
  rng::Rng r(rng::derive_seed(seed, "synthetic-dataset"));
  static const char* kNames[] = {"tom", "ana", "leah", "sam", "mia", "ben"};
  static const char* kItems[] = {"apples", "coins", "books", "cards", "shells", "pens"};
  for (int i = 0; i < count; ++i) {
    const auto a = r.uniform_int(2, 9);
    const auto b = r.uniform_int(2, 9);
    const bool add = r.uniform() < 0.5;
    const char* name = kNames[r.uniform_int(0, 5)];
    const char* item = kItems[r.uniform_int(0, 5)];
    BenchmarkExample e;
    char id[32];
    std::snprintf(id, sizeof(id), "synthetic-%04d", i);
    e.id = id;
    e.dataset = "synthetic";
    e.task_kind = TaskKind::Numeric;
    std::ostringstream q;
    if (add) {
      q << name << " has " << a << " " << item << " and gets " << b
        << " more. how many " << item << " does " << name << " have now?";
      e.ground_truth = NormalizedAnswer::numeric(static_cast<double>(a + b));
    } else {
      q << name << " has " << (a + b) << " " << item << " and gives away " << b
        << ". how many " << item << " are left?";
      e.ground_truth = NormalizedAnswer::numeric(static_cast<double>(a));
    }
    e.question = q.str();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Exemplar> load_exemplars(const std::string& dataset, const std::string& dir) {
  const std::string path = dir + "/" + dataset + ".jsonl";
  auto in = open_or_throw(path);
  std::vector<Exemplar> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    try {
      out.push_back(Exemplar{j.at("question").get<std::string>(),
                             j.at("answer").get<std::string>(),
                             j.at("cot").get<std::string>()});
    } catch (const json::exception& ex) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  const int expected = expected_exemplar_count(dataset);
  if (expected > 0 && static_cast<int>(out.size()) != expected) {
    throw DataError(path + ": expected " + std::to_string(expected) + " exemplars, found " +
                    std::to_string(out.size()));
  }
  const TaskKind kind = dataset_task_kind(dataset);
  for (const auto& e : out) {
    if (!parse_answer_value(e.answer, kind)) {
      throw DataError(path + ": exemplar answer does not parse: " + e.answer);
    }
  }
  return out;
}

void ingest_gsm8k(const std::string& input_path, const std::string& output_path) {
  auto in = open_or_throw(input_path);
  std::vector<BenchmarkExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, input_path, lineno);
    BenchmarkExample e;
    char id[32];
    std::snprintf(id, sizeof(id), "gsm8k-%04d", lineno - 1);
    e.id = id;
    e.dataset = "gsm8k";
    e.task_kind = TaskKind::Numeric;
    e.question = j.at("question").get<std::string>();
    const std::string solution = j.at("answer").get<std::string>();
    const auto marker = solution.rfind("####");
    if (marker == std::string::npos) {
      throw DataError(input_path + ":" + std::to_string(lineno) + ": missing #### marker");
    }
    auto value = parse_answer_value(solution.substr(marker + 4), TaskKind::Numeric);
    if (!value) {
      throw DataError(input_path + ":" + std::to_string(lineno) +
                      ": gold answer is not a number");
    }
    e.ground_truth = *value;
    out.push_back(std::move(e));
  }
  write_canonical_jsonl(output_path, out);
}

void ingest_singleeq(const std::string& input_path, const std::string& output_path) {
  auto in = open_or_throw(input_path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError(input_path + ": malformed JSON: " + e.what());
  }
  if (!root.is_array()) throw DataError(input_path + ": expected a JSON array");
  std::vector<BenchmarkExample> out;
  for (const auto& item : root) {
    BenchmarkExample e;
    e.dataset = "singleeq";
    e.task_kind = TaskKind::Numeric;
    e.id = "singleeq-" + std::to_string(item.at("iIndex").get<long>());
    e.question = item.at("sQuestion").get<std::string>();
    const auto& solutions = item.at("lSolutions");
    if (!solutions.is_array() || solutions.empty()) {
      throw DataError(input_path + ": " + e.id + " has no solutions");
    }
    e.ground_truth = NormalizedAnswer::numeric(solutions.at(0).get<double>());
    out.push_back(std::move(e));
  }
  write_canonical_jsonl(output_path, out);
}

void ingest_strategyqa(const std::string& input_path, const std::string& output_path) {
  auto in = open_or_throw(input_path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError(input_path + ": malformed JSON: " + e.what());
  }
  const json* items = &root;
  if (root.is_object() && root.contains("examples")) items = &root.at("examples");
  if (!items->is_array()) throw DataError(input_path + ": expected a JSON array");
  std::vector<BenchmarkExample> out;
  int index = 0;
  for (const auto& item : *items) {
    BenchmarkExample e;
    e.dataset = "strategyqa";
    e.task_kind = TaskKind::Boolean;
    if (item.contains("qid")) {
      e.id = "strategyqa-" + item.at("qid").get<std::string>();
    } else {
      char id[32];
      std::snprintf(id, sizeof(id), "strategyqa-%04d", index);
      e.id = id;
    }
    e.question = item.at("question").get<std::string>();
    e.ground_truth = NormalizedAnswer::boolean(item.at("answer").get<bool>());
    out.push_back(std::move(e));
    ++index;
  }
  write_canonical_jsonl(output_path, out);
}

}  // namespace cotstress
