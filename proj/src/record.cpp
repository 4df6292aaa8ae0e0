#include "cotstress/record.hpp"

#include "cotstress/errors.hpp"

namespace cotstress {

using nlohmann::json;

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::IncorrectBaseline:
      return "incorrect_baseline";
    case Outcome::Wrong:
      return "wrong";
    case Outcome::Success:
      return "success";
    case Outcome::Unattackable:
      return "unattackable";
  }
  return "unattackable";
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "incorrect_baseline") return Outcome::IncorrectBaseline;
  if (s == "wrong") return Outcome::Wrong;
  if (s == "success") return Outcome::Success;
  if (s == "unattackable") return Outcome::Unattackable;
  throw DataError("unknown outcome: " + std::string(s));
}

namespace {

json trace_to_json(const GenerationTrace& g) {
  return json{{"text", g.text},
              {"answer_text", g.answer_text},
              {"cot_text", g.cot_text},
              {"parsed", g.parsed},
              {"correct", g.correct}};
}

GenerationTrace trace_from_json(const json& j) {
  GenerationTrace g;
  g.text = j.at("text").get<std::string>();
  g.answer_text = j.at("answer_text").get<std::string>();
  g.cot_text = j.at("cot_text").get<std::string>();
  g.parsed = j.at("parsed").get<bool>();
  g.correct = j.at("correct").get<bool>();
  return g;
}

}  // namespace

void to_json(json& j, const AttackRecord& r) {
  j = json{};
  j["example_id"] = r.example_id;
  j["dataset"] = r.dataset;
  j["task_kind"] = r.task_kind;
  j["ground_truth"] = r.ground_truth;
  j["model_id"] = r.model_id;
  j["attack"] = r.attack;
  j["mode"] = r.mode;
  j["seed_global"] = r.seed_global;
  j["seed_example"] = r.seed_example;
  j["config"] = r.config;
  j["prompt_segments"] = r.prompt_segments;
  j["boundaries"] = json{{"n1", r.n1}, {"n2", r.n2}, {"n3", r.n3}, {"n4", r.n4}};
  j["original_question"] = r.original_question;
  j["perturbed_question"] = r.perturbed_question;
  j["original_question_tokens"] = r.original_question_tokens;
  j["perturbed_question_tokens"] = r.perturbed_question_tokens;
  j["inserted_indices"] = r.inserted_indices;
  j["baseline"] = trace_to_json(r.baseline);
  if (r.stage1) j["stage1"] = trace_to_json(*r.stage1);
  j["steps"] = json::array();
  for (const auto& s : r.steps) {
    json swaps = json::array();
    for (const auto& w : s.swaps) {
      swaps.push_back(json{{"position", w.position},
                           {"previous_id", w.previous_id},
                           {"candidate_id", w.candidate_id},
                           {"score", w.score},
                           {"accepted", w.accepted}});
    }
    j["steps"].push_back(json{{"loss", json{{"l_c", s.loss.l_c},
                                            {"l_a", s.loss.l_a},
                                            {"lambda", s.loss.lambda},
                                            {"l_opt", s.loss.l_opt},
                                            {"skipped_nonfinite", s.loss.skipped_nonfinite}}},
                              {"swaps", swaps}});
  }
  if (r.final_generation) j["final_generation"] = trace_to_json(*r.final_generation);
  j["judges"] = json::array();
  for (const auto& v : r.judges) {
    j["judges"].push_back(json{{"judge", v.judge},
                               {"stage", v.stage},
                               {"rating", v.rating},
                               {"parse_status", v.parse_status},
                               {"raw", v.raw},
                               {"model", v.model}});
  }
  if (r.outcome) j["outcome"] = std::string(to_string(*r.outcome));
  j["errored"] = r.errored;
  j["error"] = r.error;
  if (r.monotone_fraction) j["monotone_fraction"] = *r.monotone_fraction;
  if (r.token_identity_rate) j["token_identity_rate"] = *r.token_identity_rate;
  if (r.delta_path) j["delta_path"] = *r.delta_path;
}

void from_json(const json& j, AttackRecord& r) {
  r = AttackRecord{};
  r.example_id = j.at("example_id").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.task_kind = j.at("task_kind").get<std::string>();
  r.ground_truth = j.at("ground_truth").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.attack = j.at("attack").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.seed_global = j.at("seed_global").get<std::uint64_t>();
  r.seed_example = j.at("seed_example").get<std::uint64_t>();
  r.config = j.at("config");
  r.prompt_segments = j.at("prompt_segments").get<std::array<std::string, 4>>();
  const auto& b = j.at("boundaries");
  r.n1 = b.at("n1").get<long>();
  r.n2 = b.at("n2").get<long>();
  r.n3 = b.at("n3").get<long>();
  r.n4 = b.at("n4").get<long>();
  r.original_question = j.at("original_question").get<std::string>();
  r.perturbed_question = j.at("perturbed_question").get<std::string>();
  r.original_question_tokens = j.at("original_question_tokens").get<std::vector<TokenId>>();
  r.perturbed_question_tokens = j.at("perturbed_question_tokens").get<std::vector<TokenId>>();
  r.inserted_indices = j.at("inserted_indices").get<std::vector<long>>();
  r.baseline = trace_from_json(j.at("baseline"));
  if (j.contains("stage1")) r.stage1 = trace_from_json(j.at("stage1"));
  for (const auto& s : j.at("steps")) {
    StepTrace step;
    const auto& loss = s.at("loss");
    step.loss.l_c = loss.at("l_c").get<double>();
    step.loss.l_a = loss.at("l_a").get<double>();
    step.loss.lambda = loss.at("lambda").get<double>();
    step.loss.l_opt = loss.at("l_opt").get<double>();
    step.loss.skipped_nonfinite = loss.at("skipped_nonfinite").get<bool>();
    for (const auto& w : s.at("swaps")) {
      SwapTrace swap;
      swap.position = w.at("position").get<long>();
      swap.previous_id = w.at("previous_id").get<TokenId>();
      swap.candidate_id = w.at("candidate_id").get<TokenId>();
      swap.score = w.at("score").get<double>();
      swap.accepted = w.at("accepted").get<bool>();
      step.swaps.push_back(swap);
    }
    r.steps.push_back(std::move(step));
  }
  if (j.contains("final_generation")) {
    r.final_generation = trace_from_json(j.at("final_generation"));
  }
  for (const auto& v : j.at("judges")) {
    JudgeTrace t;
    t.judge = v.at("judge").get<std::string>();
    t.stage = v.at("stage").get<std::string>();
    t.rating = v.at("rating").get<int>();
    t.parse_status = v.at("parse_status").get<std::string>();
    t.raw = v.at("raw").get<std::string>();
    t.model = v.at("model").get<std::string>();
    r.judges.push_back(std::move(t));
  }
  if (j.contains("outcome")) r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.errored = j.at("errored").get<bool>();
  r.error = j.at("error").get<std::string>();
  if (j.contains("monotone_fraction")) r.monotone_fraction = j.at("monotone_fraction").get<double>();
  if (j.contains("token_identity_rate")) {
    r.token_identity_rate = j.at("token_identity_rate").get<double>();
  }
  if (j.contains("delta_path")) r.delta_path = j.at("delta_path").get<std::string>();
}

std::vector<AttackRecord> read_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<AttackRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<AttackRecord>());
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

RecordWriter::RecordWriter(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw DataError("cannot open record file for append: " + path);
}

void RecordWriter::append(const AttackRecord& record) {
  std::lock_guard<std::mutex> lock(mutex_);
  out_ << json(record).dump() << '\n';
  out_.flush();
  ++written_;
}

}  // namespace cotstress
