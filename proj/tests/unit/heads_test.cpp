// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fedtune/heads/head.h"
#include "fedtune/tensor/ops.h"
#include "test_util.h"

namespace fedtune::heads {
namespace {

using testing::RandomTensor;

HeadConfig Config(HeadKind kind) { return HeadConfig{kind, 2, 384, 8, {}}; }

Tensor Forward(const ParamSet& p, const HeadConfig& c, const Tensor& z) {
  Tape tape(false);
  return HeadForward(tape, p, c, tape.Constant(z)).value();
}

TEST(HeadCountTest, LinearIsExactly770) {
  EXPECT_EQ(HeadParamCount(Config(HeadKind::kLinear)), 770);
  EXPECT_EQ(BuildHead(Config(HeadKind::kLinear), 1).NumElements(), 770);
}

TEST(HeadCountTest, ConvLaddersMatchHandCounts) {
  const int64_t conv_s = 27 * (384 * 128 + 128 * 64 + 64 * 64 + 64 * 32) +
                         (128 + 64 + 64 + 32) + 32 * 2 + 2;
  const int64_t conv_l = 27 * (384 * 256 + 256 * 128 + 128 * 128 + 128 * 64) +
                         (256 + 128 + 128 + 64) + 64 * 2 + 2;
  EXPECT_EQ(conv_s, 1714530);
  EXPECT_EQ(conv_l, 4203202);
  EXPECT_EQ(HeadParamCount(Config(HeadKind::kConvS)), conv_s);
  EXPECT_EQ(HeadParamCount(Config(HeadKind::kConvL)), conv_l);
  EXPECT_EQ(BuildHead(Config(HeadKind::kConvS), 1).NumElements(), conv_s);
  EXPECT_EQ(BuildHead(Config(HeadKind::kConvL), 1).NumElements(), conv_l);
  EXPECT_GE(conv_s, 1700000);
  EXPECT_LE(conv_s, 1720000);
  EXPECT_GE(conv_l, 4190000);
  EXPECT_LE(conv_l, 4210000);
}

TEST(HeadTest, NamesAndKinds) {
  const ParamSet p = BuildHead(Config(HeadKind::kConvS), 1);
  EXPECT_EQ(p.Names(), (std::vector<std::string>{
                           "head.conv0.weight", "head.conv0.bias", "head.conv1.weight",
                           "head.conv1.bias", "head.conv2.weight", "head.conv2.bias",
                           "head.conv3.weight", "head.conv3.bias", "head.fc.weight",
                           "head.fc.bias"}));
  EXPECT_EQ(p.at("head.conv0.weight").shape(), (Shape{128, 384, 3, 3, 3}));
  EXPECT_THROW(ParseHeadKind("ConvM"), ConfigError);
  for (auto k : {HeadKind::kLinear, HeadKind::kConvS, HeadKind::kConvL}) {
    EXPECT_EQ(ParseHeadKind(ToString(k)), k);
  }
}

TEST(HeadTest, ZeroLinearWeightsGiveBias) {
  const HeadConfig c = Config(HeadKind::kLinear);
  ParamSet p = BuildHead(c, 1);
  p.at("head.fc.weight").Fill(0.0);
  p.at("head.fc.bias") = Tensor({2}, std::vector<float>{0.25f, -1.5f});
  const Tensor logits = Forward(p, c, RandomTensor({3, 384, 8, 8, 8}, 2, DType::kFloat32));
  for (int n = 0; n < 3; ++n) {
    EXPECT_EQ(logits.item(2 * n), 0.25);
    EXPECT_EQ(logits.item(2 * n + 1), -1.5);
  }
}

TEST(HeadTest, WrongFeatureShapeRejected) {
  const HeadConfig c = Config(HeadKind::kLinear);
  const ParamSet p = BuildHead(c, 1);
  EXPECT_THROW(Forward(p, c, Tensor({1, 384, 4, 4, 4}, DType::kFloat32)), ConfigError);
}

HeadConfig TinyConv() { return HeadConfig{HeadKind::kConvS, 2, 3, 4, {4, 3, 3, 2}}; }

TEST(HeadTest, BatchRowsIndependentAndPermutationEquivariant) {
  const HeadConfig c = HeadConfig{HeadKind::kConvS, 2, 16, 8, {8, 4, 4, 4}};
  const ParamSet p = BuildHead(c, 3);
  const Tensor z = RandomTensor({3, 16, 8, 8, 8}, 4, DType::kFloat32);
  const Tensor logits = Forward(p, c, z);
  // Permute rows (2, 0, 1) and duplicate row 0.
  const int64_t per = 16 * 512;
  const auto src = z.data<float>();
  std::vector<float> perm;
  for (int64_t r : {2, 0, 1, 2}) perm.insert(perm.end(), src.begin() + r * per, src.begin() + (r + 1) * per);
  const Tensor out = Forward(p, c, Tensor({4, 16, 8, 8, 8}, perm));
  const int64_t order[] = {2, 0, 1, 2};
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t k = 0; k < 2; ++k) EXPECT_EQ(out.item(i * 2 + k), logits.item(order[i] * 2 + k));
  }
}

TEST(HeadTest, LinearHeadIsAffineInFeatures) {
  const HeadConfig c = Config(HeadKind::kLinear);
  ParamSet p = BuildHead(c, 5, DType::kFloat64);
  p.at("head.fc.bias") = Tensor({2}, std::vector<double>{0.3, -0.7});
  const Tensor z = RandomTensor({2, 384, 8, 8, 8}, 6);
  Tensor z2 = z;
  for (int64_t i = 0; i < z2.numel(); ++i) z2.set_item(i, 2.0 * z.item(i));
  const Tensor l1 = Forward(p, c, z), l2 = Forward(p, c, z2);
  for (int64_t i = 0; i < 4; ++i) {
    const double b = p.at("head.fc.bias").item(i % 2);
    EXPECT_NEAR(l2.item(i), 2.0 * (l1.item(i) - b) + b, 1e-12);
  }
}

TEST(HeadGradTest, AllKindsMatchFiniteDifferences) {
  const Tensor z = RandomTensor({2, 3, 4, 4, 4}, 7);
  for (auto kind : {HeadKind::kLinear, HeadKind::kConvS, HeadKind::kConvL}) {
    HeadConfig c = TinyConv();
    c.kind = kind;
    if (kind == HeadKind::kConvL) c.channels = {5, 4, 4, 3};
    const ParamSet p = BuildHead(c, 8, DType::kFloat64);
    const double err = testing::ParamGradCheck(
        [&](Tape& tape, const ParamSet& ps) { return HeadForward(tape, ps, c, tape.Constant(z)); },
        p);
    EXPECT_LT(err, 1e-4) << ToString(kind);
  }
}

TEST(HeadGradTest, DefaultLadderFlops) {
  const HeadConfig c = Config(HeadKind::kConvS);
  const int64_t flops = 2 * 27 * 512 * (384 * 128 + 128 * 64 + 64 * 64 + 64 * 32) + 2 * 32 * 2;
  EXPECT_EQ(HeadFlopsPerSample(c), flops);
}

}  // namespace
}  // namespace fedtune::heads
