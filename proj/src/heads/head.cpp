// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/heads/head.h"

#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::heads {
namespace {

std::string ConvPrefix(size_t i) { return "head.conv" + std::to_string(i); }

}  // namespace

std::string ToString(HeadKind kind) {
  switch (kind) {
    case HeadKind::kLinear:
      return "Linear";
    case HeadKind::kConvS:
      return "ConvS";
    case HeadKind::kConvL:
      return "ConvL";
  }
  return "?";
}

HeadKind ParseHeadKind(const std::string& name) {
  if (name == "Linear") return HeadKind::kLinear;
  if (name == "ConvS") return HeadKind::kConvS;
  if (name == "ConvL") return HeadKind::kConvL;
  throw ConfigError("unknown head kind '" + name + "' (expected Linear, ConvS, ConvL)");
}

std::vector<int64_t> HeadConfig::Ladder() const {
  if (kind == HeadKind::kLinear) return {};
  if (!channels.empty()) return channels;
  if (kind == HeadKind::kConvS) return {128, 64, 64, 32};
  return {256, 128, 128, 64};
}

void HeadConfig::Validate() const {
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (in_channels < 1 || spatial < 1) throw ConfigError("head input dims must be positive");
  for (int64_t c : channels) {
    if (c < 1) throw ConfigError("head channel counts must be positive");
  }
}

ParamSet BuildHead(const HeadConfig& config, uint64_t seed, DType dtype) {
  config.Validate();
  ParamSet params;
  int64_t cin = config.in_channels;
  const std::vector<int64_t> ladder = config.Ladder();
  for (size_t i = 0; i < ladder.size(); ++i) {
    const std::string prefix = ConvPrefix(i);
    const int64_t fan_in = cin * kKernel * kKernel * kKernel;
    params.Add(prefix + ".weight",
               SeededInit({ladder[i], cin, kKernel, kKernel, kKernel},
                          InitScheme::UniformKaiming(fan_in), DeriveSeed(seed, prefix), dtype),
               true);
    params.Add(prefix + ".bias", Tensor({ladder[i]}, dtype), true);
    cin = ladder[i];
  }
  params.Add("head.fc.weight",
             SeededInit({cin, config.num_classes}, InitScheme::UniformKaiming(cin),
                        DeriveSeed(seed, "head.fc"), dtype),
             true);
  params.Add("head.fc.bias", Tensor({config.num_classes}, dtype), true);
  return params;
}

Var HeadForward(Tape& tape, const ParamSet& params, const HeadConfig& config, const Var& features) {
  const Shape& s = features.shape();
  if (s.size() != 5 || s[1] != config.in_channels || s[2] != config.spatial ||
      s[3] != config.spatial || s[4] != config.spatial) {
    throw ConfigError("head expects [N," + std::to_string(config.in_channels) + "," +
                      std::to_string(config.spatial) + "^3] features, got " + ShapeToString(s));
  }
  Var x = features;
  const std::vector<int64_t> ladder = config.Ladder();
  for (size_t i = 0; i < ladder.size(); ++i) {
    const std::string prefix = ConvPrefix(i);
    x = ops::Relu(ops::Conv3d(x, tape.Param(params, prefix + ".weight"),
                              tape.Param(params, prefix + ".bias"), ops::Padding::kSame));
  }
  return ops::Linear(ops::GlobalAvgPool3d(x), tape.Param(params, "head.fc.weight"),
                     tape.Param(params, "head.fc.bias"));
}

int64_t HeadParamCount(const HeadConfig& config) {
  int64_t total = 0, cin = config.in_channels;
  for (int64_t cout : config.Ladder()) {
    total += kKernel * kKernel * kKernel * cin * cout + cout;
    cin = cout;
  }
  return total + cin * config.num_classes + config.num_classes;
}

int64_t HeadFlopsPerSample(const HeadConfig& config) {
  const int64_t voxels = config.spatial * config.spatial * config.spatial;
  int64_t total = 0, cin = config.in_channels;
  for (int64_t cout : config.Ladder()) {
    total += 2 * kKernel * kKernel * kKernel * cin * cout * voxels;
    cin = cout;
  }
  return total + 2 * cin * config.num_classes;
}

}  // namespace fedtune::heads
