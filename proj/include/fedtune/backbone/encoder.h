// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_BACKBONE_ENCODER_H_
#define FEDTUNE_BACKBONE_ENCODER_H_

#include <cstdint>
#include <string>

#include "fedtune/tensor/param_set.h"
#include "fedtune/tensor/tape.h"

namespace fedtune::backbone {

// 3D vision-transformer encoder. Output is always embed_dim x 8 x 8 x 8.
struct EncoderConfig {
  int64_t input_size = 128;
  int64_t patch_size = 16;
  int64_t embed_dim = 384;
  int64_t depth = 12;
  int64_t heads = 6;
  int64_t mlp_ratio = 4;
  uint64_t seed = 0;

  // 32^3 inputs with 4^3 patches: same token grid and widths as the default.
  static EncoderConfig TestPreset();

  int64_t grid() const { return input_size / patch_size; }
  int64_t tokens() const { return grid() * grid() * grid(); }
  int64_t mlp_dim() const { return mlp_ratio * embed_dim; }

  // Throws ConfigError unless the token grid is 8^3 and heads divide d.
  void Validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

constexpr int64_t kTokenGrid = 8;

// Names of the four attention projections of a block, in wire order.
inline constexpr const char* kProjections[] = {"query", "key", "value", "output"};

std::string BlockPrefix(int64_t block);

struct FrozenEncoder {
  EncoderConfig config;
  ParamSet params;
};

// Seeded random surrogate weights: gaussian(0.02) matrices and positional
// embedding, zero biases, unit layernorm scales. All tensors frozen.
FrozenEncoder BuildEncoder(const EncoderConfig& config, DType dtype = DType::kFloat32);

// Appends the encoder tensors to `params` (used when building a model that
// shares one ParamSet between encoder and head).
void AddEncoderParams(const EncoderConfig& config, DType dtype, ParamSet& params);

// Toggles trainable on every backbone tensor; LoRA factors are untouched.
void SetTrainable(ParamSet& params, bool flag);
void SetTrainable(FrozenEncoder& encoder, bool flag);

// Multi-head self-attention sublayer: output(attn(query x, key x, value x)).
// tokens [N,T,d].
Var SelfAttention(Tape& tape, const ParamSet& params, const EncoderConfig& config,
                  int64_t block, const Var& x);

// Pre-norm transformer block:
//   x + SelfAttention(norm1(x)), then + fc2(gelu(fc1(norm2(.)))).
Var AttentionBlock(Tape& tape, const ParamSet& params, const EncoderConfig& config,
                   int64_t block, const Var& x);

// [N,1,S,S,S] -> [N,d,8,8,8] on a caller-owned tape.
Var EncodeVar(Tape& tape, const ParamSet& params, const EncoderConfig& config, const Var& input);

// Inference-mode encode.
Tensor Encode(const FrozenEncoder& encoder, const Tensor& batch);

// Closed-form counts. Parameters: patch embedding p^3*d + d, positional
// embedding T*d, per block 4(d^2 + d) + 2d*m + m + d + 4d, final norm 2d.
int64_t BlockParamCount(const EncoderConfig& config);
int64_t ParamCount(const EncoderConfig& config);
// Multiply-adds counted as 2 FLOPs; matmuls only (norms, softmax, GELU and
// residual adds are ignored).
int64_t FlopsPerSample(const EncoderConfig& config);

}  // namespace fedtune::backbone

#endif  // FEDTUNE_BACKBONE_ENCODER_H_
