#include "cotstress/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "cotstress/answer.hpp"
#include "cotstress/errors.hpp"
#include "cotstress/svg_plot.hpp"

namespace cotstress {

namespace {

std::optional<double> pct(long numerator, long denominator) {
  if (denominator <= 0) return std::nullopt;
  return 100.0 * static_cast<double>(numerator) / static_cast<double>(denominator);
}

CellKey key_of(const AttackRecord& r) {
  return CellKey{r.model_id, r.dataset, r.attack, r.mode};
}

}  // namespace

std::optional<double> MetricsCell::acc_pct() const {
  return pct(counts.correct_baseline, counts.total - counts.errored);
}
std::optional<double> MetricsCell::ur_pct() const {
  return pct(counts.unattackable, counts.correct_baseline);
}
std::optional<double> MetricsCell::sr_pct() const {
  return pct(counts.success, counts.correct_baseline);
}
std::optional<double> MetricsCell::wr_pct() const {
  return pct(counts.wrong, counts.correct_baseline);
}

MetricsCell aggregate(const std::vector<AttackRecord>& records) {
  if (records.empty()) throw DataError("aggregate: no records");
  MetricsCell cell;
  cell.key = key_of(records.front());
  for (const auto& r : records) {
    if (key_of(r) != cell.key) {
      throw DataError("aggregate: records span more than one (model, dataset, attack, mode)");
    }
    ++cell.counts.total;
    if (r.errored) {
      ++cell.counts.errored;
      continue;
    }
    if (!r.outcome) throw DataError("aggregate: non-errored record without outcome");
    switch (*r.outcome) {
      case Outcome::IncorrectBaseline:
        ++cell.counts.incorrect_baseline;
        break;
      case Outcome::Wrong:
        ++cell.counts.correct_baseline;
        ++cell.counts.wrong;
        break;
      case Outcome::Success:
        ++cell.counts.correct_baseline;
        ++cell.counts.success;
        break;
      case Outcome::Unattackable:
        ++cell.counts.correct_baseline;
        ++cell.counts.unattackable;
        break;
    }
  }
  return cell;
}

std::vector<MetricsCell> aggregate_grouped(const std::vector<AttackRecord>& records) {
  std::map<CellKey, std::vector<AttackRecord>> groups;
  for (const auto& r : records) groups[key_of(r)].push_back(r);
  std::vector<MetricsCell> cells;
  cells.reserve(groups.size());
  for (const auto& [key, group] : groups) cells.push_back(aggregate(group));
  return cells;
}

std::string format_pct(double pct_value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", pct_value);
  return buf;
}

std::string format_model_row(const std::string& model,
                             const std::vector<std::optional<double>>& values) {
  std::string out = model;
  double sum = 0.0;
  int present = 0;
  for (const auto& v : values) {
    out += ",";
    if (v) {
      out += format_pct(*v);
      sum += *v;
      ++present;
    }
  }
  out += ",";
  if (present > 0) out += format_pct(sum / present);
  return out;
}

TransferOutcome transfer_evaluate(const std::vector<AttackRecord>& successful_records,
                                  ChatClient& target, const std::string& target_model,
                                  Judge& judge_reasoning, const DecodeParams& decode,
                                  const PromptTemplate& prompt_template,
                                  std::vector<JudgeTrace>* judge_log) {
  if (successful_records.empty()) throw DataError("transfer_evaluate: no records");
  TransferOutcome out;

  ChatParams params;
  params.model = target_model;
  params.temperature = decode.temperature;
  params.max_tokens = decode.max_new_tokens;

  for (const auto& record : successful_records) {
    if (!record.outcome || *record.outcome != Outcome::Success) {
      throw DataError("transfer_evaluate: record " + record.example_id + " is not a success");
    }
    const TaskKind kind = task_kind_from_string(record.task_kind);
    const auto expected = parse_answer_value(record.ground_truth, kind);
    if (!expected) throw DataError("transfer_evaluate: unparseable ground truth");

    const std::string original_prompt =
        record.prompt_segments[0] + record.original_question + prompt_template.answer_sep;
    const std::string perturbed_prompt =
        record.prompt_segments[0] + record.perturbed_question + prompt_template.answer_sep;

    std::string original_reply, perturbed_reply;
    try {
      original_reply = target.complete({{"user", original_prompt}}, params);
      perturbed_reply = target.complete({{"user", perturbed_prompt}}, params);
    } catch (const TransportError&) {
      ++out.transport_failures;
      continue;
    }
    ++out.attempted;

    const SplitGeneration perturbed_split = split_answer_cot(perturbed_reply, kind);
    const bool answer_correct =
        perturbed_split.parsed && perturbed_split.value.equals(*expected);
    if (!answer_correct) continue;

    const SplitGeneration original_split = split_answer_cot(original_reply, kind);
    const std::string reference_cot =
        original_split.parsed && !original_split.cot_text.empty() ? original_split.cot_text
                                                                  : original_reply;
    const std::string candidate_cot =
        !perturbed_split.cot_text.empty() ? perturbed_split.cot_text : perturbed_reply;
    const JudgeVerdict verdict =
        judge_reasoning.evaluate(reference_cot, candidate_cot, /*parse_retries=*/2);
    if (judge_log != nullptr) {
      judge_log->push_back(JudgeTrace{"J1", "transfer", verdict.rating,
                                      std::string(to_string(verdict.parse_status)),
                                      verdict.raw_text, verdict.model_name});
    }
    if (!verdict.failed() && verdict.rating == 0) ++out.transfers;
  }
  return out;
}

nlohmann::json metrics_to_json(const std::vector<MetricsCell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json j;
    j["model"] = c.key.model;
    j["dataset"] = c.key.dataset;
    j["attack"] = c.key.attack;
    j["mode"] = c.key.mode;
    j["counts"] = {{"total", c.counts.total},
                   {"errored", c.counts.errored},
                   {"incorrect_baseline", c.counts.incorrect_baseline},
                   {"correct_baseline", c.counts.correct_baseline},
                   {"wrong", c.counts.wrong},
                   {"success", c.counts.success},
                   {"unattackable", c.counts.unattackable}};
    auto put = [&j](const char* name, std::optional<double> v) {
      if (v) {
        j[name] = *v;
      } else {
        j[name] = nullptr;
      }
    };
    put("acc_pct", c.acc_pct());
    put("ur_pct", c.ur_pct());
    put("sr_pct", c.sr_pct());
    put("wr_pct", c.wr_pct());
    put("transfer_rate_pct", c.transfer_rate_pct);
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

std::string csv_value(std::optional<double> v) { return v ? format_pct(*v) : std::string(); }

/// Cross-dataset average of a metric for one (model, attack, mode) triple.
std::optional<double> model_average(const std::vector<MetricsCell>& cells, const CellKey& key,
                                    std::optional<double> (MetricsCell::*metric)() const) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.key.model != key.model || c.key.attack != key.attack || c.key.mode != key.mode) {
      continue;
    }
    if (auto v = (c.*metric)()) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

void write_pivot_tables(const std::vector<MetricsCell>& cells, const std::string& dir) {
  struct Metric {
    const char* name;
    std::optional<double> (MetricsCell::*fn)() const;
  };
  const Metric metrics[] = {{"acc", &MetricsCell::acc_pct},
                            {"ur", &MetricsCell::ur_pct},
                            {"sr", &MetricsCell::sr_pct},
                            {"wr", &MetricsCell::wr_pct}};

  std::set<std::pair<std::string, std::string>> attacks;
  std::vector<std::string> datasets, models;
  for (const auto& c : cells) {
    attacks.insert({c.key.attack, c.key.mode});
    if (std::find(datasets.begin(), datasets.end(), c.key.dataset) == datasets.end()) {
      datasets.push_back(c.key.dataset);
    }
    if (std::find(models.begin(), models.end(), c.key.model) == models.end()) {
      models.push_back(c.key.model);
    }
  }

  for (const auto& [attack, mode] : attacks) {
    for (const auto& metric : metrics) {
      std::ofstream out(dir + "/" + attack + "_" + mode + "_" + metric.name + ".csv");
      out << "model";
      for (const auto& d : datasets) out << "," << d;
      out << ",avg\n";
      for (const auto& model : models) {
        std::vector<std::optional<double>> values;
        for (const auto& d : datasets) {
          std::optional<double> v;
          for (const auto& c : cells) {
            if (c.key == CellKey{model, d, attack, mode}) v = (c.*metric.fn)();
          }
          values.push_back(v);
        }
        out << format_model_row(model, values) << "\n";
      }
    }
  }
}

}  // namespace

void emit_report(const std::vector<MetricsCell>& cells,
                 const std::vector<AblationSeries>& ablations, const std::string& out_dir) {
  if (cells.empty()) throw DataError("emit_report: no metric cells");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/tables");
  fs::create_directories(out_dir + "/plots");

  {
    std::ofstream csv(out_dir + "/metrics.csv");
    csv << "model,dataset,attack,mode,total,errored,incorrect_baseline,correct_baseline,"
           "wrong,success,unattackable,acc_pct,ur_pct,sr_pct,wr_pct,transfer_pct,"
           "acc_avg,ur_avg,sr_avg,wr_avg\n";
    for (const auto& c : cells) {
      csv << c.key.model << "," << c.key.dataset << "," << c.key.attack << "," << c.key.mode
          << "," << c.counts.total << "," << c.counts.errored << ","
          << c.counts.incorrect_baseline << "," << c.counts.correct_baseline << ","
          << c.counts.wrong << "," << c.counts.success << "," << c.counts.unattackable << ","
          << csv_value(c.acc_pct()) << "," << csv_value(c.ur_pct()) << ","
          << csv_value(c.sr_pct()) << "," << csv_value(c.wr_pct()) << ","
          << csv_value(c.transfer_rate_pct) << ","
          << csv_value(model_average(cells, c.key, &MetricsCell::acc_pct)) << ","
          << csv_value(model_average(cells, c.key, &MetricsCell::ur_pct)) << ","
          << csv_value(model_average(cells, c.key, &MetricsCell::sr_pct)) << ","
          << csv_value(model_average(cells, c.key, &MetricsCell::wr_pct)) << "\n";
    }
  }

  {
    std::ofstream json_out(out_dir + "/metrics.json");
    json_out << metrics_to_json(cells).dump(2) << "\n";
  }

  write_pivot_tables(cells, out_dir + "/tables");

  for (const auto& series : ablations) {
    if (series.points.empty()) {
      std::cerr << "warning: empty ablation series for " << series.parameter << "/"
                << series.dataset << "; no plot emitted\n";
      continue;
    }
    svg::Series ur{"UR", "#1f77b4", {}};
    svg::Series sr{"SR", "#d62728", {}};
    svg::Series wr{"WR", "#2ca02c", {}};
    for (const auto& p : series.points) {
      if (p.ur_pct) ur.points.emplace_back(p.parameter_value, *p.ur_pct);
      if (p.sr_pct) sr.points.emplace_back(p.parameter_value, *p.sr_pct);
      if (p.wr_pct) wr.points.emplace_back(p.parameter_value, *p.wr_pct);
    }
    const std::string path =
        out_dir + "/plots/" + series.parameter + "_" + series.dataset + ".svg";
    svg::write_line_plot(path, series.dataset + ": rates vs " + series.parameter,
                         series.parameter, {ur, sr, wr});
  }
}

}  // namespace cotstress
