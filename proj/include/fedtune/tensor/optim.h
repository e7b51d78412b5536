// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_OPTIM_H_
#define FEDTUNE_TENSOR_OPTIM_H_

#include <cstdint>
#include <string>
#include <unordered_map>

#include "fedtune/tensor/param_set.h"

namespace fedtune {

// w <- w - lr * g for every entry of `grads`; each must name a trainable
// parameter of matching shape.
void SgdStep(ParamSet& params, const ParamSet& grads, double lr);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// First/second moments per parameter plus the shared step count. Moments are
// kept in double regardless of parameter dtype.
struct AdamState {
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  int64_t step = 0;
  std::unordered_map<std::string, Moments> moments;

  // Zero moments for every trainable entry.
  static AdamState ForParams(const ParamSet& params);
};

// Decoupled weight decay (Loshchilov & Hutter):
//   w <- w - lr * wd * w
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Throws ConfigError if a gradient has no optimizer state.
void AdamWStep(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               const AdamWHyper& hyper = {});

}  // namespace fedtune

#endif  // FEDTUNE_TENSOR_OPTIM_H_
