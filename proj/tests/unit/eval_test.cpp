// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedtune/eval/metrics.h"
#include "fedtune/tensor/rng.h"
#include "fedtune/tensor/tensor.h"

namespace fedtune::eval {
namespace {

double BruteForceAuc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Two Gaussian classes with mean gap `gap`; both classes always present.
Instance Separated(int64_t n, double gap, uint64_t seed) {
  Rng rng(seed);
  Instance in;
  for (int64_t i = 0; i < n; ++i) {
    const int y = i % 2;
    in.labels.push_back(y);
    in.scores.push_back(rng.Gaussian() + gap * y);
  }
  return in;
}

TEST(AucTest, WorkedExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(Auc(s, y), 0.75);
}

TEST(AucTest, SeparatedAndTied) {
  EXPECT_EQ(Auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(Auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{1, 1, 0, 0}), 0.0);
  EXPECT_EQ(Auc(std::vector<double>(7, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0, 0}), 0.5);
}

TEST(AucTest, Errors) {
  EXPECT_THROW(Auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), ConfigError);
  EXPECT_THROW(Auc(std::vector<double>{1, 2}, std::vector<int>{1}), ConfigError);
  EXPECT_THROW(Auc(std::vector<double>{1, 2}, std::vector<int>{0, 2}), ConfigError);
  EXPECT_THROW(Auc(std::vector<double>{1, NAN}, std::vector<int>{0, 1}), NumericError);
}

TEST(AucTest, MatchesBruteForceOnRandomSmallInstances) {
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    const size_t n = 2 + rng.Below(30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
      // Coarse grid so ties occur often.
      s[i] = static_cast<double>(rng.Below(8)) * 0.25;
      y[i] = static_cast<int>(rng.Below(2));
    }
    y[0] = 0;
    y[1] = 1;
    ASSERT_EQ(Auc(s, y), BruteForceAuc(s, y)) << "instance " << t;
  }
}

TEST(AucTest, InvariantUnderIncreasingTransforms) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const Instance in = Separated(40, rng.Uniform(0, 2), 100 + t);
    const double base = Auc(in.scores, in.labels);
    std::vector<double> ex, affine, neg;
    for (double s : in.scores) {
      ex.push_back(std::exp(s));
      affine.push_back(3.0 * s - 7.0);
      neg.push_back(-s);
    }
    ASSERT_EQ(Auc(ex, in.labels), base);
    ASSERT_EQ(Auc(affine, in.labels), base);
    ASSERT_DOUBLE_EQ(Auc(neg, in.labels) + base, 1.0);
  }
}

TEST(BootstrapTest, ContainsPointEstimateAndIsDeterministic) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = Separated(60, 0.8, seed);
    const double a = Auc(in.scores, in.labels);
    const auto [lo, hi] = BootstrapCi(in.scores, in.labels, 1000, 0.95, seed);
    EXPECT_LE(lo, a);
    EXPECT_GE(hi, a);
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0);
    const auto again = BootstrapCi(in.scores, in.labels, 1000, 0.95, seed);
    EXPECT_EQ(again.first, lo);
    EXPECT_EQ(again.second, hi);
  }
}

TEST(BootstrapTest, NarrowForWidelySeparatedClasses) {
  const Instance in = Separated(1000, 4.0, 5);
  const auto [lo, hi] = BootstrapCi(in.scores, in.labels, 2000, 0.95, 5);
  EXPECT_LT(hi - lo, 0.02);
}

TEST(BootstrapTest, WidthHalvesWhenSampleSizeQuadruples) {
  const Instance small = Separated(200, 1.0, 21);
  const Instance large = Separated(800, 1.0, 22);
  const auto a = BootstrapCi(small.scores, small.labels, 4000, 0.95, 1);
  const auto b = BootstrapCi(large.scores, large.labels, 4000, 0.95, 2);
  const double ratio = (b.second - b.first) / (a.second - a.first);
  EXPECT_NEAR(ratio, 0.5, 0.1);
}

TEST(BootstrapTest, SingleClassRejected) {
  EXPECT_THROW(BootstrapCi(std::vector<double>{1, 2}, std::vector<int>{0, 0}, 10), ConfigError);
}

TEST(SignificanceTest, Examples) {
  const EvalResult linear{"All", 0.76, 0.74, 0.78, 100};
  const EvalResult convs{"All", 0.86, 0.84, 0.87, 100};
  EXPECT_TRUE(Significant(linear, convs));
  EXPECT_TRUE(Significant(convs, linear));
  EXPECT_FALSE(Significant(linear, linear));
  const EvalResult left{"All", 0.55, 0.5, 0.6, 10};
  const EvalResult right{"All", 0.65, 0.6, 0.7, 10};
  EXPECT_FALSE(Significant(left, right));
  EXPECT_FALSE(Significant(right, left));
}

TEST(EvaluateTest, FieldsConsistent) {
  const Instance in = Separated(100, 1.0, 3);
  const EvalResult r = Evaluate("ADNI", in.scores, in.labels, 500, 3);
  EXPECT_EQ(r.scope, "ADNI");
  EXPECT_EQ(r.n, 100);
  EXPECT_EQ(r.auc, Auc(in.scores, in.labels));
  EXPECT_LE(r.ci_low, r.auc);
  EXPECT_GE(r.ci_high, r.auc);
}

}  // namespace
}  // namespace fedtune::eval
