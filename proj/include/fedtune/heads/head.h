// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_HEADS_HEAD_H_
#define FEDTUNE_HEADS_HEAD_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fedtune/tensor/param_set.h"
#include "fedtune/tensor/tape.h"

namespace fedtune::heads {

enum class HeadKind { kLinear, kConvS, kConvL };

std::string ToString(HeadKind kind);
// "Linear", "ConvS" or "ConvL"; anything else is a ConfigError.
HeadKind ParseHeadKind(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::kConvS;
  int64_t num_classes = 2;
  int64_t in_channels = 384;
  int64_t spatial = 8;
  // Overrides the conv channel ladder (tiny presets for gradient checks).
  std::vector<int64_t> channels;

  // Conv output channels; empty for Linear.
  std::vector<int64_t> Ladder() const;
  void Validate() const;

  bool operator==(const HeadConfig&) const = default;
};

constexpr int64_t kKernel = 3;

// Linear: avgpool -> fc. ConvS/ConvL: four 3x3x3 same-padded conv + ReLU
// layers -> avgpool -> fc. Kaiming-uniform weights, zero biases. Tensors are
// named head.conv{i}.weight/bias and head.fc.weight/bias, all trainable.
ParamSet BuildHead(const HeadConfig& config, uint64_t seed, DType dtype = DType::kFloat32);

// features [N, in_channels, s, s, s] -> logits [N, num_classes].
Var HeadForward(Tape& tape, const ParamSet& params, const HeadConfig& config, const Var& features);

// Closed forms: sum over conv layers of 27 Cin Cout + Cout, plus fc.
int64_t HeadParamCount(const HeadConfig& config);
int64_t HeadFlopsPerSample(const HeadConfig& config);

}  // namespace fedtune::heads

#endif  // FEDTUNE_HEADS_HEAD_H_
