// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/agg/aggregation.h"

#include <algorithm>
#include <cmath>

namespace fedtune::agg {
namespace {

constexpr double kSumTolerance = 1e-12;

Weights Normalized(Weights w) {
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

std::string ToString(Method method) {
  switch (method) {
    case Method::kSimpleAvg:
      return "SimpleAvg";
    case Method::kFedAvg:
      return "FedAvg";
    case Method::kFedCE:
      return "FedCE";
    case Method::kRateMyLora:
      return "RateMyLoRA";
  }
  return "?";
}

Method ParseMethod(const std::string& name) {
  for (Method m : {Method::kSimpleAvg, Method::kFedAvg, Method::kFedCE, Method::kRateMyLora}) {
    if (ToString(m) == name) return m;
  }
  throw ConfigError("unknown aggregation '" + name +
                    "' (expected SimpleAvg, FedAvg, FedCE, RateMyLoRA)");
}

void CheckWeights(std::span<const double> w) {
  if (w.empty()) throw ConfigError("empty weight vector");
  double total = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("aggregation weights must be finite and >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw ConfigError("aggregation weights sum to " + std::to_string(total) + ", not 1");
  }
}

ParamSet Aggregate(std::span<const ParamSet> updates, std::span<const double> w) {
  if (updates.empty()) throw ConfigError("nothing to aggregate");
  if (updates.size() != w.size()) {
    throw ConfigError(std::to_string(updates.size()) + " updates but " + std::to_string(w.size()) +
                      " weights");
  }
  CheckWeights(w);
  for (const auto& u : updates) {
    if (!u.SameStructure(updates[0])) throw ConfigError("client updates differ in structure");
  }
  ParamSet out = updates[0];
  for (const std::string& name : out.Names()) {
    Tensor& dst = out.at(name);
    DispatchDType(dst.dtype(), [&]<typename T>() {
      std::vector<std::span<const T>> src;
      for (const auto& u : updates) src.push_back(u.at(name).data<T>());
      auto o = dst.data<T>();
      for (size_t k = 0; k < o.size(); ++k) {
        const double ref = src[0][k];
        double sum = 0.0, comp = 0.0;
        for (size_t i = 1; i < src.size(); ++i) {
          const double term = w[i] * (static_cast<double>(src[i][k]) - ref);
          const double t = sum + term;
          comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
          sum = t;
        }
        o[k] = static_cast<T>(ref + (sum + comp));
      }
    });
  }
  return out;
}

Weights SimpleAvgWeights(int64_t n) {
  if (n < 1) throw ConfigError("need at least one client");
  return Weights(static_cast<size_t>(n), 1.0 / static_cast<double>(n));
}

Weights FedAvgWeights(std::span<const int64_t> sizes) {
  if (sizes.empty()) throw ConfigError("need at least one client");
  int64_t total = 0;
  for (int64_t s : sizes) {
    if (s < 0) throw ConfigError("negative client dataset size");
    total += s;
  }
  if (total == 0) throw ConfigError("FedAvg weights undefined: total dataset size is 0");
  Weights w;
  for (int64_t s : sizes) w.push_back(static_cast<double>(s) / static_cast<double>(total));
  return w;
}

FedCeResult FedCeWeights(const std::vector<std::vector<double>>& deltas,
                         std::span<const double> loo_errors, std::span<const double> prev) {
  const size_t n = deltas.size();
  if (n < 2) throw ConfigError("FedCE needs at least two clients");
  if (loo_errors.size() != n) throw ConfigError("FedCE: one LOO error per client required");
  Weights previous = prev.empty() ? SimpleAvgWeights(static_cast<int64_t>(n))
                                  : Weights(prev.begin(), prev.end());
  if (previous.size() != n) throw ConfigError("FedCE: previous weights have the wrong length");

  const size_t dim = deltas[0].size();
  std::vector<double> total(dim, 0.0);
  for (const auto& d : deltas) {
    if (d.size() != dim) throw ConfigError("FedCE: update vectors differ in length");
    for (size_t k = 0; k < dim; ++k) total[k] += d[k];
  }
  FedCeResult result;
  result.raw.assign(n, 0.0);
  double raw_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> others(dim);
    for (size_t k = 0; k < dim; ++k) others[k] = total[k] - deltas[i][k];
    const double norms = std::sqrt(Dot(deltas[i], deltas[i])) * std::sqrt(Dot(others, others));
    const double cosine = norms > 0.0 ? Dot(deltas[i], others) / norms : 0.0;
    if (!std::isfinite(loo_errors[i]) || loo_errors[i] < 0.0) {
      throw ConfigError("FedCE: LOO errors must be finite and >= 0");
    }
    result.raw[i] = std::max(0.0, cosine) * loo_errors[i];
    raw_sum += result.raw[i];
  }
  if (raw_sum <= 0.0) {
    result.fallback = true;
    result.raw.assign(n, 0.0);
    result.weights = previous;
    return result;
  }
  for (double& r : result.raw) r /= raw_sum;
  result.weights.resize(n);
  for (size_t i = 0; i < n; ++i) result.weights[i] = 0.5 * previous[i] + 0.5 * result.raw[i];
  result.weights = Normalized(std::move(result.weights));
  return result;
}

Weights RateMyLoraWeights(std::span<const double> prev_acc, std::span<const double> acc) {
  if (prev_acc.size() != acc.size() || acc.empty()) {
    throw ConfigError("Rate-My-LoRA needs validation accuracy for every client at r-1 and r");
  }
  const double floor = 1.0 / (10.0 * static_cast<double>(acc.size()));
  Weights w;
  for (size_t i = 0; i < acc.size(); ++i) w.push_back(std::max(0.0, prev_acc[i] - acc[i]) + floor);
  return Normalized(std::move(w));
}

std::vector<ParamSet> LeaveOneOutModels(std::span<const ParamSet> updates,
                                        std::span<const double> w) {
  const size_t n = updates.size();
  if (n < 2) throw ConfigError("leave-one-out models need at least two clients");
  if (w.size() != n) throw ConfigError("one weight per update required");
  std::vector<ParamSet> out;
  for (size_t i = 0; i < n; ++i) {
    std::vector<ParamSet> rest;
    Weights rw;
    double total = 0.0;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      rest.push_back(updates[j]);
      rw.push_back(w[j]);
      total += w[j];
    }
    rw = total > 0.0 ? Normalized(std::move(rw)) : SimpleAvgWeights(static_cast<int64_t>(n - 1));
    out.push_back(Aggregate(rest, rw));
  }
  return out;
}

}  // namespace fedtune::agg
