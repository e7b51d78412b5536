// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/optim.h"

#include <cmath>

namespace fedtune {
namespace {

Tensor& TrainableTarget(ParamSet& params, const ParamEntry& grad) {
  ParamEntry& entry = params.Entry(grad.name);
  if (!entry.trainable) {
    throw ConfigError("gradient supplied for frozen parameter '" + grad.name + "'");
  }
  if (entry.tensor.shape() != grad.tensor.shape() || entry.tensor.dtype() != grad.tensor.dtype()) {
    throw ConfigError("gradient for '" + grad.name + "' does not match the parameter shape");
  }
  return entry.tensor;
}

}  // namespace

void SgdStep(ParamSet& params, const ParamSet& grads, double lr) {
  for (const auto& g : grads) {
    Tensor& w = TrainableTarget(params, g);
    DispatchDType(w.dtype(), [&]<typename T>() {
      auto wv = w.data<T>();
      auto gv = g.tensor.data<T>();
      const T step = static_cast<T>(lr);
      for (size_t i = 0; i < wv.size(); ++i) wv[i] -= step * gv[i];
    });
  }
}

AdamState AdamState::ForParams(const ParamSet& params) {
  AdamState state;
  for (const auto& e : params) {
    if (!e.trainable) continue;
    const auto n = static_cast<size_t>(e.tensor.numel());
    state.moments.emplace(e.name, Moments{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
  return state;
}

void AdamWStep(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
               const AdamWHyper& hyper) {
  for (const auto& g : grads) {
    if (!state.moments.count(g.name)) {
      throw ConfigError("missing optimizer state for trainable tensor '" + g.name + "'");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(hyper.beta1, t);
  const double bias2 = 1.0 - std::pow(hyper.beta2, t);
  for (const auto& g : grads) {
    Tensor& w = TrainableTarget(params, g);
    auto& mom = state.moments.at(g.name);
    DispatchDType(w.dtype(), [&]<typename T>() {
      auto wv = w.data<T>();
      auto gv = g.tensor.data<T>();
      for (size_t i = 0; i < wv.size(); ++i) {
        double wi = wv[i];
        const double gi = gv[i];
        wi -= lr * hyper.weight_decay * wi;
        mom.m[i] = hyper.beta1 * mom.m[i] + (1.0 - hyper.beta1) * gi;
        mom.v[i] = hyper.beta2 * mom.v[i] + (1.0 - hyper.beta2) * gi * gi;
        const double m_hat = mom.m[i] / bias1;
        const double v_hat = mom.v[i] / bias2;
        wi -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
        wv[i] = static_cast<T>(wi);
      }
    });
  }
}

}  // namespace fedtune
