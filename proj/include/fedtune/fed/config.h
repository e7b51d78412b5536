// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_FED_CONFIG_H_
#define FEDTUNE_FED_CONFIG_H_

#include <cstdint>
#include <string>

#include "fedtune/agg/aggregation.h"

namespace fedtune::fed {

enum class Optimizer { kAdamW, kSgd };
std::string ToString(Optimizer optimizer);
Optimizer ParseOptimizer(const std::string& name);

// Simulated link: transfer time = rtt + bytes / bandwidth.
struct LinkModel {
  double bandwidth_bytes_per_s = 12.5e6;  // 100 Mbit/s
  double rtt_s = 0.02;
  void Validate() const;
};

double SimulateLatency(uint64_t bytes, const LinkModel& link);

struct FedConfig {
  int64_t rounds = 10;
  int64_t batch_size = 8;
  double lr = 1e-3;
  Optimizer optimizer = Optimizer::kAdamW;
  int64_t local_epochs = 1;
  double weight_decay = 0.01;  // AdamW only
  agg::Method aggregation = agg::Method::kFedAvg;
  uint64_t seed = 0;
  int threads = 1;  // concurrent client tasks
  LinkModel link;

  void Validate() const;
};

}  // namespace fedtune::fed

#endif  // FEDTUNE_FED_CONFIG_H_
