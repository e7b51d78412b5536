// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/eval/report.h"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "fedtune/baselines/baselines.h"
#include "fedtune/common/text_io.h"
#include "fedtune/fed/wire.h"

namespace fedtune::eval {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kResultsHeader[] = "scope,auc,ci_low,ci_high,n";
constexpr char kEfficiencyHeader[] =
    "experiment,trainable_params,message_bytes_down,message_bytes_up,latency_ms,flops_per_sample";

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void CheckCell(const std::string& s) {
  if (s.empty() || s.find_first_of(",\n\r\"") != std::string::npos) {
    throw ConfigError("report label '" + s + "' must be non-empty without commas, quotes or newlines");
  }
}

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Data rows of a CSV with the given header; throws FormatError on mismatch.
std::vector<std::vector<std::string>> Rows(const std::string& text, const std::string& header) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line != header) {
    throw FormatError("expected CSV header '" + header + "'");
  }
  const size_t columns = SplitLine(header).size();
  std::vector<std::vector<std::string>> rows;
  int64_t number = 1;
  while (std::getline(ss, line)) {
    ++number;
    if (line.empty()) continue;
    auto cells = SplitLine(line);
    if (cells.size() != columns) {
      throw FormatError("CSV line " + std::to_string(number) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(columns));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double ParseDouble(const std::string& s) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("'" + s + "' is not a number");
  }
}

int64_t ParseInt(const std::string& s) {
  try {
    size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("'" + s + "' is not an integer");
  }
}

}  // namespace

EfficiencyReport ModelEfficiency(const std::string& experiment, const ModelSpec& spec,
                                 const fed::LinkModel& link) {
  const ParamSet trainable = BuildModel(spec, 0).params.Trainable();
  if (trainable.NumElements() != TrainableParamCount(spec)) {
    throw ConfigError("trainable count " + std::to_string(trainable.NumElements()) +
                      " disagrees with the closed form " + std::to_string(TrainableParamCount(spec)));
  }
  EfficiencyReport r;
  r.experiment = experiment;
  r.trainable_params = trainable.NumElements();
  r.bytes_down = fed::Encode({fed::MessageKind::kGlobalModel, 0, trainable, {}, {}}).size();
  r.bytes_up = fed::Encode({fed::MessageKind::kClientUpdate, 0, trainable, {}, {}}).size();
  r.latency_s = fed::SimulateLatency(r.bytes_down, link) + fed::SimulateLatency(r.bytes_up, link);
  r.flops_per_sample = FlopsPerSample(spec);
  return r;
}

EfficiencyReport NccEfficiency(const std::string& experiment, const ModelSpec& spec,
                               const fed::LinkModel& link) {
  const int64_t dim = spec.mode == InputMode::kVolumes ? spec.encoder.embed_dim : spec.head.in_channels;
  baselines::NccStats empty;
  empty.sum_de.assign(static_cast<size_t>(dim), 0.0);
  empty.sum_cn.assign(static_cast<size_t>(dim), 0.0);
  EfficiencyReport r;
  r.experiment = experiment;
  r.bytes_up = baselines::EncodeNccStats(empty).size();
  r.latency_s = fed::SimulateLatency(r.bytes_up, link);
  // Two distances: subtract, square, accumulate per coordinate.
  r.flops_per_sample = 6 * dim;
  if (spec.mode == InputMode::kVolumes) r.flops_per_sample += backbone::FlopsPerSample(spec.encoder);
  return r;
}

std::string ResultsCsv(std::span<const EvalResult> results) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : results) {
    CheckCell(r.scope);
    out += r.scope + "," + Fixed(r.auc, 6) + "," + Fixed(r.ci_low, 6) + "," + Fixed(r.ci_high, 6) +
           "," + std::to_string(r.n) + "\n";
  }
  return out;
}

std::string EfficiencyCsv(std::span<const EfficiencyReport> reports) {
  std::string out = std::string(kEfficiencyHeader) + "\n";
  for (const auto& r : reports) {
    CheckCell(r.experiment);
    out += r.experiment + "," + std::to_string(r.trainable_params) + "," + std::to_string(r.bytes_down) +
           "," + std::to_string(r.bytes_up) + "," + Fixed(r.latency_s * 1e3, 3) + "," +
           std::to_string(r.flops_per_sample) + "\n";
  }
  return out;
}

std::string RoundsJsonl(std::span<const fed::RoundLog> logs) {
  std::string out;
  for (const auto& log : logs) {
    ordered_json j;
    j["round"] = log.round;
    j["clients"] = log.clients;
    j["weights"] = log.weights;
    ordered_json loss = ordered_json::array(), acc = ordered_json::array(), auc = ordered_json::array();
    for (const auto& v : log.val) {
      loss.push_back(v.loss);
      acc.push_back(v.accuracy);
      auc.push_back(v.auc);
    }
    j["val_loss"] = loss;
    j["val_accuracy"] = acc;
    j["val_auc"] = auc;
    j["update_norm"] = log.update_norms;
    if (!log.loo_loss.empty()) {
      j["loo_loss"] = log.loo_loss;
      j["fedce_raw"] = log.fedce_raw;
      j["fedce_fallback"] = log.fedce_fallback;
    }
    j["bytes_down"] = log.bytes_down;
    j["bytes_up"] = log.bytes_up;
    j["latency_ms"] = log.latency_s * 1e3;
    out += j.dump() + "\n";
  }
  return out;
}

std::string WeightsJsonl(std::span<const fed::RoundLog> logs) {
  std::string out;
  for (const auto& log : logs) {
    for (size_t i = 0; i < log.clients.size(); ++i) {
      ordered_json j;
      j["round"] = log.round;
      j["client"] = log.clients[i];
      j["weight"] = log.weights.at(i);
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::vector<EvalResult> ParseResultsCsv(const std::string& text) {
  std::vector<EvalResult> out;
  for (const auto& row : Rows(text, kResultsHeader)) {
    out.push_back({row[0], ParseDouble(row[1]), ParseDouble(row[2]), ParseDouble(row[3]), ParseInt(row[4])});
  }
  return out;
}

std::vector<EfficiencyReport> ParseEfficiencyCsv(const std::string& text) {
  std::vector<EfficiencyReport> out;
  for (const auto& row : Rows(text, kEfficiencyHeader)) {
    out.push_back({row[0], ParseInt(row[1]), static_cast<uint64_t>(ParseInt(row[2])),
                   static_cast<uint64_t>(ParseInt(row[3])), ParseDouble(row[4]) / 1e3, ParseInt(row[5])});
  }
  return out;
}

void EmitReports(const std::string& dir, std::span<const EvalResult> results,
                 std::span<const fed::RoundLog> logs, std::span<const EfficiencyReport> efficiency) {
  const std::filesystem::path base(dir);
  WriteTextFile((base / kResultsFile).string(), ResultsCsv(results));
  WriteTextFile((base / kRoundsFile).string(), RoundsJsonl(logs));
  WriteTextFile((base / kWeightsFile).string(), WeightsJsonl(logs));
  WriteTextFile((base / kEfficiencyFile).string(), EfficiencyCsv(efficiency));
}

}  // namespace fedtune::eval
