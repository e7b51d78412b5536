// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_EVAL_REPORT_H_
#define FEDTUNE_EVAL_REPORT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedtune/eval/metrics.h"
#include "fedtune/fed/config.h"
#include "fedtune/fed/protocol.h"
#include "fedtune/model/model.h"

namespace fedtune::eval {

struct EfficiencyReport {
  std::string experiment;
  int64_t trainable_params = 0;
  uint64_t bytes_down = 0;  // per client per round
  uint64_t bytes_up = 0;
  double latency_s = 0.0;   // down + up over the simulated link
  int64_t flops_per_sample = 0;
  bool operator==(const EfficiencyReport&) const = default;
};

// Trainable count from the built model, checked against the closed forms;
// message sizes from the serializer.
EfficiencyReport ModelEfficiency(const std::string& experiment, const ModelSpec& spec,
                                 const fed::LinkModel& link);
// Federated NCC: nothing trained, one NCC_STATS upload per client.
EfficiencyReport NccEfficiency(const std::string& experiment, const ModelSpec& spec,
                               const fed::LinkModel& link);

// Fixed-format writers; identical inputs give byte-identical files.
std::string ResultsCsv(std::span<const EvalResult> results);
std::string EfficiencyCsv(std::span<const EfficiencyReport> reports);
// One JSON object per round with weights, validation metrics and traffic.
std::string RoundsJsonl(std::span<const fed::RoundLog> logs);
// One JSON object per (round, client) weight.
std::string WeightsJsonl(std::span<const fed::RoundLog> logs);

std::vector<EvalResult> ParseResultsCsv(const std::string& text);
std::vector<EfficiencyReport> ParseEfficiencyCsv(const std::string& text);

constexpr char kResultsFile[] = "results.csv";
constexpr char kRoundsFile[] = "rounds.jsonl";
constexpr char kWeightsFile[] = "weights.jsonl";
constexpr char kEfficiencyFile[] = "efficiency.csv";

// Writes the four files above into `dir`. Throws IoError if unwritable.
void EmitReports(const std::string& dir, std::span<const EvalResult> results,
                 std::span<const fed::RoundLog> logs, std::span<const EfficiencyReport> efficiency);

}  // namespace fedtune::eval

#endif  // FEDTUNE_EVAL_REPORT_H_
