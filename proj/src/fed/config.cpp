// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/fed/config.h"

#include <cmath>

#include "fedtune/common/errors.h"

namespace fedtune::fed {

std::string ToString(Optimizer optimizer) {
  return optimizer == Optimizer::kAdamW ? "adamw" : "sgd";
}

Optimizer ParseOptimizer(const std::string& name) {
  if (name == "adamw") return Optimizer::kAdamW;
  if (name == "sgd") return Optimizer::kSgd;
  throw ConfigError("unknown optimizer '" + name + "' (expected adamw, sgd)");
}

void LinkModel::Validate() const {
  if (!(bandwidth_bytes_per_s > 0.0) || !std::isfinite(bandwidth_bytes_per_s)) {
    throw ConfigError("link bandwidth must be positive and finite");
  }
  if (!(rtt_s >= 0.0) || !std::isfinite(rtt_s)) throw ConfigError("link rtt must be >= 0");
}

double SimulateLatency(uint64_t bytes, const LinkModel& link) {
  link.Validate();
  return link.rtt_s + static_cast<double>(bytes) / link.bandwidth_bytes_per_s;
}

void FedConfig::Validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("lr must be finite and >= 0");
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
    throw ConfigError("weight_decay must be finite and >= 0");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  link.Validate();
}

}  // namespace fedtune::fed
