// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_EVAL_METRICS_H_
#define FEDTUNE_EVAL_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>

namespace fedtune::eval {

// Mann-Whitney AUC: P(score_pos > score_neg) + P(tie) / 2, computed from
// midranks in O(n log n). Labels are 0/1. Throws ConfigError when a class
// is missing or the spans differ in length.
double Auc(std::span<const double> scores, std::span<const int> labels);

constexpr int kDefaultBootstraps = 10000;
constexpr double kDefaultLevel = 0.95;

// Percentile bootstrap interval for the AUC. Each resample draws n
// (score, label) pairs with replacement from its own derived stream
// (seed, resample index); single-class resamples are redrawn from the same
// stream. Quantiles use linear interpolation between order statistics.
std::pair<double, double> BootstrapCi(std::span<const double> scores, std::span<const int> labels,
                                      int n_boot = kDefaultBootstraps,
                                      double level = kDefaultLevel, uint64_t seed = 0);

struct EvalResult {
  std::string scope;  // client name or "All"
  double auc = 0.5;
  double ci_low = 0.0;
  double ci_high = 1.0;
  int64_t n = 0;
};

EvalResult Evaluate(std::string scope, std::span<const double> scores,
                    std::span<const int> labels, int n_boot = kDefaultBootstraps,
                    uint64_t seed = 0);

// True iff the closed intervals [ci_low, ci_high] are disjoint.
bool Significant(const EvalResult& a, const EvalResult& b);

}  // namespace fedtune::eval

#endif  // FEDTUNE_EVAL_METRICS_H_
