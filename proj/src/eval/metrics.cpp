// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/eval/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedtune/common/errors.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::eval {
namespace {

void CheckInputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ConfigError("AUC got " + std::to_string(scores.size()) + " scores and " +
                      std::to_string(labels.size()) + " labels");
  }
  int64_t pos = 0, neg = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++pos;
    } else if (labels[i] == 0) {
      ++neg;
    } else {
      throw ConfigError("AUC labels must be 0 or 1");
    }
    if (!std::isfinite(scores[i])) throw NumericError("non-finite score passed to AUC");
  }
  if (pos == 0 || neg == 0) throw ConfigError("AUC needs both classes present");
}

// Samples grouped by tied score, ascending.
struct TieGroups {
  std::vector<size_t> order;  // sample indices sorted by score
  std::vector<size_t> group;  // group id per sample
  size_t count = 0;
};

TieGroups GroupTies(std::span<const double> scores) {
  TieGroups g;
  g.order.resize(scores.size());
  std::iota(g.order.begin(), g.order.end(), 0);
  std::stable_sort(g.order.begin(), g.order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  g.group.resize(scores.size());
  for (size_t k = 0; k < g.order.size(); ++k) {
    if (k > 0 && scores[g.order[k]] != scores[g.order[k - 1]]) ++g.count;
    g.group[g.order[k]] = g.count;
  }
  if (!scores.empty()) ++g.count;
  return g;
}

// AUC from per-group positive/negative weights in ascending score order.
double GroupedAuc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double neg_below = 0.0, wins = 0.0, total_pos = 0.0;
  for (size_t k = 0; k < pos.size(); ++k) {
    wins += pos[k] * (neg_below + 0.5 * neg[k]);
    neg_below += neg[k];
    total_pos += pos[k];
  }
  return wins / (total_pos * neg_below);
}

double Quantile(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double Auc(std::span<const double> scores, std::span<const int> labels) {
  CheckInputs(scores, labels);
  const TieGroups g = GroupTies(scores);
  std::vector<double> pos(g.count, 0.0), neg(g.count, 0.0);
  for (size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg)[g.group[i]] += 1.0;
  return GroupedAuc(pos, neg);
}

std::pair<double, double> BootstrapCi(std::span<const double> scores, std::span<const int> labels,
                                      int n_boot, double level, uint64_t seed) {
  CheckInputs(scores, labels);
  if (n_boot < 1) throw ConfigError("bootstrap count must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("CI level must lie in (0, 1)");
  const TieGroups g = GroupTies(scores);
  const uint64_t n = scores.size();
  std::vector<double> aucs(static_cast<size_t>(n_boot));
  std::vector<double> pos(g.count), neg(g.count);
  for (int b = 0; b < n_boot; ++b) {
    Rng rng(DeriveSeed(seed, "bootstrap", 0, static_cast<uint64_t>(b)));
    while (true) {
      std::fill(pos.begin(), pos.end(), 0.0);
      std::fill(neg.begin(), neg.end(), 0.0);
      int64_t n_pos = 0;
      for (uint64_t k = 0; k < n; ++k) {
        const size_t i = rng.Below(n);
        if (labels[i] == 1) {
          pos[g.group[i]] += 1.0;
          ++n_pos;
        } else {
          neg[g.group[i]] += 1.0;
        }
      }
      if (n_pos > 0 && static_cast<uint64_t>(n_pos) < n) break;
    }
    aucs[b] = GroupedAuc(pos, neg);
  }
  std::sort(aucs.begin(), aucs.end());
  const double alpha = 1.0 - level;
  return {Quantile(aucs, alpha / 2.0), Quantile(aucs, 1.0 - alpha / 2.0)};
}

EvalResult Evaluate(std::string scope, std::span<const double> scores,
                    std::span<const int> labels, int n_boot, uint64_t seed) {
  EvalResult r;
  r.scope = std::move(scope);
  r.auc = Auc(scores, labels);
  std::tie(r.ci_low, r.ci_high) = BootstrapCi(scores, labels, n_boot, kDefaultLevel, seed);
  r.n = static_cast<int64_t>(scores.size());
  return r;
}

bool Significant(const EvalResult& a, const EvalResult& b) {
  return a.ci_high < b.ci_low || b.ci_high < a.ci_low;
}

}  // namespace fedtune::eval
