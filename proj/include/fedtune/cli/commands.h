// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_CLI_COMMANDS_H_
#define FEDTUNE_CLI_COMMANDS_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fedtune/cli/config.h"
#include "fedtune/data/dataset.h"
#include "fedtune/eval/report.h"
#include "fedtune/fed/protocol.h"

namespace fedtune::cli {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitDivergence = 3, kExitIo = 4 };

std::vector<data::ClientDataset> LoadFederation(const ExperimentConfig& config);

// Per-client test AUC with bootstrap CI, plus the pooled "All" row. Clients
// whose test split lacks a class are skipped.
std::vector<eval::EvalResult> EvaluateScores(std::span<const data::ClientDataset> clients,
                                             const std::vector<std::vector<double>>& scores,
                                             int bootstraps, uint64_t seed);
std::vector<eval::EvalResult> EvaluateModel(const Model& model,
                                            std::span<const data::ClientDataset> clients,
                                            int bootstraps, uint64_t seed);

struct RunOutcome {
  std::string name;
  std::vector<eval::EvalResult> results;
  std::vector<fed::RoundLog> logs;
  eval::EfficiencyReport efficiency;
};

RunOutcome ExecuteRun(const RunPlan& plan, std::span<const data::ClientDataset> clients,
                      const ExperimentConfig& config, std::ostream& log);

// Writes one feature file per client plus manifest.json into `out`.
void CmdGenData(const ExperimentConfig& config, const std::string& out, std::ostream& log);
// Runs the sweep; each run writes into out/<run name>/.
void CmdRun(const ExperimentConfig& config, const std::string& out, std::ostream& log);
// Reads every run directory under `dir` and writes table_auc.csv,
// table_efficiency.csv and significance.csv into `dir`; prints the tables.
void CmdReport(const std::string& dir, std::ostream& out);
// Prints per-scope CIs of two run directories and flags significant pairs.
void CmdCompare(const std::string& a, const std::string& b, std::ostream& out);

// Entry point of the fedtune tool. Maps ConfigError to 2, NumericError to
// 3, IoError and FormatError to 4.
int RunCli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fedtune::cli

#endif  // FEDTUNE_CLI_COMMANDS_H_
