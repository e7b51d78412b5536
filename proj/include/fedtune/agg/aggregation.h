// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_AGG_AGGREGATION_H_
#define FEDTUNE_AGG_AGGREGATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedtune/tensor/param_set.h"

namespace fedtune::agg {

enum class Method { kSimpleAvg, kFedAvg, kFedCE, kRateMyLora };

// "SimpleAvg", "FedAvg", "FedCE", "RateMyLoRA".
std::string ToString(Method method);
Method ParseMethod(const std::string& name);

using Weights = std::vector<double>;

// Throws ConfigError unless every weight is finite and >= 0 and the sum is
// 1 within 1e-12.
void CheckWeights(std::span<const double> w);

// theta = sum_i w_i theta_i, evaluated per element as
// theta_0 + sum_i w_i (theta_i - theta_0) in double with Neumaier
// compensation, then rounded to the tensor dtype. Equal to the plain
// weighted sum when sum w = 1, and exact when all updates coincide.
// Throws ConfigError on structure mismatch or bad weights.
ParamSet Aggregate(std::span<const ParamSet> updates, std::span<const double> w);

Weights SimpleAvgWeights(int64_t n);

// w_i = n_i / sum n. Throws ConfigError on negative sizes or a zero total.
Weights FedAvgWeights(std::span<const int64_t> sizes);

struct FedCeResult {
  Weights weights;
  Weights raw;          // normalized grad x data term (zeros on fallback)
  bool fallback = false;  // every raw weight was zero
};

// deltas[i] = flattened theta_i - theta_glob^(r-1); loo_errors[i] = error of
// the model aggregated without i on client i's validation split.
//   grad_i = max(0, cos(delta_i, sum_{j != i} delta_j))   (0 for zero norms)
//   raw_i  = grad_i * loo_errors[i], normalized
//   w      = (prev + raw) / 2, renormalized; prev when all raw_i are 0.
// An empty `prev` means uniform. Throws ConfigError when N < 2.
FedCeResult FedCeWeights(const std::vector<std::vector<double>>& deltas,
                         std::span<const double> loo_errors, std::span<const double> prev);

// decline_i = prev_acc_i - acc_i; w_i proportional to max(0, decline_i) +
// 1/(10N). Throws ConfigError when the histories differ in length.
Weights RateMyLoraWeights(std::span<const double> prev_acc, std::span<const double> acc);

// For each i, the aggregate of {j != i} with w renormalized over j != i
// (uniform when those weights sum to 0). Throws ConfigError when N < 2.
std::vector<ParamSet> LeaveOneOutModels(std::span<const ParamSet> updates,
                                        std::span<const double> w);

// Per-round bookkeeping for the stateful strategies.
struct AggregationState {
  Method method = Method::kFedAvg;
  int64_t round = 0;
  Weights prev_weights;           // empty before the first aggregation
  std::vector<double> prev_val_acc;  // empty before the first round
};

}  // namespace fedtune::agg

#endif  // FEDTUNE_AGG_AGGREGATION_H_
