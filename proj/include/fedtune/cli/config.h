// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_CLI_CONFIG_H_
#define FEDTUNE_CLI_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fedtune/agg/aggregation.h"
#include "fedtune/data/cohort.h"
#include "fedtune/data/synth.h"
#include "fedtune/fed/config.h"
#include "fedtune/model/model.h"

namespace fedtune::cli {

// Where client data comes from.
struct FederationSource {
  enum class Kind { kBuiltin, kCohorts, kManifest };
  Kind kind = Kind::kBuiltin;
  std::vector<data::CohortSpec> cohorts;  // kCohorts
  std::string manifest;                   // kManifest
  InputMode mode = InputMode::kFeatures;
  // Synthetic feature maps only; manifest files are always 384 x 8^3.
  int64_t feature_channels = 384;
  int64_t feature_spatial = 8;
};

struct ExperimentConfig {
  FederationSource federation;
  data::HeterogeneityConfig heterogeneity;  // seed is derived from `seed`
  backbone::EncoderConfig encoder;          // volumes mode
  std::vector<heads::HeadKind> heads = {heads::HeadKind::kConvS};
  std::vector<Regime> regimes = {Regime::ClsOnly()};
  std::vector<agg::Method> aggregations = {agg::Method::kFedAvg};
  int64_t lora_rank = lora::kDefaultRank;
  DType dtype = DType::kFloat32;
  fed::FedConfig training;  // seed is derived per run
  bool ncc = false;
  bool centralized = false;
  int bootstraps = 10000;
  std::string output = "runs";
  uint64_t seed = 0;
};

// JSON document, see README for the schema. Every object rejects unknown
// keys; every value is range-checked. Throws ConfigError.
ExperimentConfig ParseExperimentConfig(const std::string& json_text);
ExperimentConfig LoadExperimentConfig(const std::string& path);
// Canonical JSON of a parsed config; parsing it again gives the same config.
std::string ToJson(const ExperimentConfig& config);

// Cohorts of the federation for synthetic sources.
std::vector<data::CohortSpec> SyntheticCohorts(const ExperimentConfig& config);
data::SynthGeometry SyntheticGeometry(const ExperimentConfig& config);
data::HeterogeneityConfig DataConfig(const ExperimentConfig& config);

struct RunPlan {
  enum class Kind { kFederated, kCentralized, kNcc };
  Kind kind = Kind::kFederated;
  std::string name;
  ModelSpec spec;
  fed::FedConfig training;
};

// Cartesian product heads x regimes x aggregations, then one centralized
// run per (head, regime) and one NCC run when requested. Each run's seed is
// DeriveSeed(seed, "run/" + name). Every plan is validated here.
std::vector<RunPlan> ExpandSweep(const ExperimentConfig& config);

}  // namespace fedtune::cli

#endif  // FEDTUNE_CLI_CONFIG_H_
