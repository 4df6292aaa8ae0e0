#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotstress/chat_client.hpp"
#include "cotstress/judge.hpp"
#include "cotstress/model.hpp"
#include "cotstress/record.hpp"

namespace cotstress {

/// Integer outcome tallies. Non-errored records partition exactly into
/// incorrect-baseline / wrong / success / unattackable, so the rate identity
/// UR + SR + WR = 100% holds in exact arithmetic over the correct set.
struct OutcomeCounts {
  long total = 0;
  long errored = 0;
  long incorrect_baseline = 0;
  long correct_baseline = 0;
  long wrong = 0;
  long success = 0;
  long unattackable = 0;

  bool partition_holds() const {
    return total == errored + incorrect_baseline + correct_baseline &&
           correct_baseline == wrong + success + unattackable;
  }
};

struct CellKey {
  std::string model;
  std::string dataset;
  std::string attack;
  std::string mode;

  auto operator<=>(const CellKey&) const = default;
};

struct MetricsCell {
  CellKey key;
  OutcomeCounts counts;
  std::optional<double> transfer_rate_pct;

  std::optional<double> acc_pct() const;  // correct / (total - errored)
  std::optional<double> ur_pct() const;   // unattackable / correct
  std::optional<double> sr_pct() const;   // success / correct
  std::optional<double> wr_pct() const;   // wrong / correct
};

/// Tallies records from a single (model, dataset, attack, mode) cell.
/// Throws on empty input or mixed keys.
MetricsCell aggregate(const std::vector<AttackRecord>& records);

/// Groups records by cell key and aggregates each group.
std::vector<MetricsCell> aggregate_grouped(const std::vector<AttackRecord>& records);

/// One decimal place, e.g. 80.5; the paper-table rendering.
std::string format_pct(double pct);

/// "model,v1,v2,...,avg" over the given dataset order; missing cells render
/// empty. This is the row format of the headline tables.
std::string format_model_row(const std::string& model, const std::vector<std::optional<double>>& values);

struct TransferOutcome {
  long transfers = 0;
  long attempted = 0;
  long transport_failures = 0;

  std::optional<double> rate_pct() const {
    if (attempted == 0) return std::nullopt;
    return 100.0 * static_cast<double>(transfers) / static_cast<double>(attempted);
  }
};

/// Replays successful adversarial questions against a black-box target: the
/// same in-context block plus the perturbed question. A transfer requires the
/// target to keep the correct answer while the reasoning judge rates its
/// chain against the target's own unperturbed chain as incorrect. Transport
/// failures leave the denominator.
TransferOutcome transfer_evaluate(const std::vector<AttackRecord>& successful_records,
                                  ChatClient& target, const std::string& target_model,
                                  Judge& judge_reasoning, const DecodeParams& decode,
                                  const PromptTemplate& prompt_template = {},
                                  std::vector<JudgeTrace>* judge_log = nullptr);

struct AblationPoint {
  double parameter_value = 0.0;
  std::optional<double> ur_pct, sr_pct, wr_pct;
};

struct AblationSeries {
  std::string parameter;  // "steps" | "insert_ratio" | "epsilon"
  std::string dataset;
  std::vector<AblationPoint> points;
};

/// Writes metrics.csv (one row per cell, with per-model cross-dataset AVG
/// columns), metrics.json, pivot tables per metric, and one SVG line plot per
/// ablation series. Empty series emit a warning instead of a plot.
void emit_report(const std::vector<MetricsCell>& cells,
                 const std::vector<AblationSeries>& ablations, const std::string& out_dir);

nlohmann::json metrics_to_json(const std::vector<MetricsCell>& cells);

}  // namespace cotstress
