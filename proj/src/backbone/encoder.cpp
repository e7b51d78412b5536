// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/backbone/encoder.h"

#include "fedtune/lora/lora.h"
#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::backbone {
namespace {

constexpr double kInitStd = 0.02;

void AddGaussian(ParamSet& params, const EncoderConfig& config, DType dtype,
                 const std::string& name, const Shape& shape) {
  params.Add(name,
             SeededInit(shape, InitScheme::Gaussian(kInitStd),
                        DeriveSeed(config.seed, "encoder/" + name), dtype),
             false);
}

void AddLinear(ParamSet& params, const EncoderConfig& config, DType dtype,
               const std::string& prefix, int64_t in, int64_t out) {
  AddGaussian(params, config, dtype, prefix + ".weight", {in, out});
  params.Add(prefix + ".bias", Tensor({out}, dtype), false);
}

void AddNorm(ParamSet& params, DType dtype, const std::string& prefix, int64_t d) {
  params.Add(prefix + ".weight", Tensor::Full({d}, 1.0, dtype), false);
  params.Add(prefix + ".bias", Tensor({d}, dtype), false);
}

Var Norm(Tape& tape, const ParamSet& params, const std::string& prefix, const Var& x) {
  return ops::LayerNorm(x, tape.Param(params, prefix + ".weight"),
                        tape.Param(params, prefix + ".bias"));
}

Var Dense(Tape& tape, const ParamSet& params, const std::string& prefix, const Var& x) {
  return ops::Linear(x, tape.Param(params, prefix + ".weight"),
                     tape.Param(params, prefix + ".bias"));
}

}  // namespace

EncoderConfig EncoderConfig::TestPreset() {
  EncoderConfig config;
  config.input_size = 32;
  config.patch_size = 4;
  return config;
}

void EncoderConfig::Validate() const {
  if (input_size <= 0 || patch_size <= 0 || embed_dim <= 0 || heads <= 0 || mlp_ratio <= 0 ||
      depth < 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (input_size % patch_size != 0) {
    throw ConfigError("input_size " + std::to_string(input_size) +
                      " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (grid() != kTokenGrid) {
    throw ConfigError("token grid must be 8^3, got " + std::to_string(grid()) + "^3");
  }
  if (embed_dim % heads != 0) {
    throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

std::string BlockPrefix(int64_t block) { return "block" + std::to_string(block); }

void AddEncoderParams(const EncoderConfig& config, DType dtype, ParamSet& params) {
  config.Validate();
  const int64_t d = config.embed_dim;
  const int64_t p3 = config.patch_size * config.patch_size * config.patch_size;
  AddLinear(params, config, dtype, "patch_embed", p3, d);
  AddGaussian(params, config, dtype, "pos_embed", {config.tokens(), d});
  for (int64_t b = 0; b < config.depth; ++b) {
    const std::string prefix = BlockPrefix(b);
    AddNorm(params, dtype, prefix + ".norm1", d);
    for (const char* proj : kProjections) {
      AddLinear(params, config, dtype, prefix + "." + proj, d, d);
    }
    AddNorm(params, dtype, prefix + ".norm2", d);
    AddLinear(params, config, dtype, prefix + ".mlp.fc1", d, config.mlp_dim());
    AddLinear(params, config, dtype, prefix + ".mlp.fc2", config.mlp_dim(), d);
  }
  AddNorm(params, dtype, "norm", d);
}

FrozenEncoder BuildEncoder(const EncoderConfig& config, DType dtype) {
  FrozenEncoder encoder{config, {}};
  AddEncoderParams(config, dtype, encoder.params);
  return encoder;
}

void SetTrainable(ParamSet& params, bool flag) {
  params.SetTrainable(
      [](const std::string& name) { return !lora::IsLoraName(name) && !name.starts_with("head."); },
      flag);
}

void SetTrainable(FrozenEncoder& encoder, bool flag) { SetTrainable(encoder.params, flag); }

Var SelfAttention(Tape& tape, const ParamSet& params, const EncoderConfig& config,
                  int64_t block, const Var& x) {
  if (config.embed_dim % config.heads != 0) {
    throw ConfigError("embed_dim is not divisible by the head count");
  }
  const std::string prefix = BlockPrefix(block) + ".";
  Var q = lora::LoraLinear(tape, params, prefix + "query", x);
  Var k = lora::LoraLinear(tape, params, prefix + "key", x);
  Var v = lora::LoraLinear(tape, params, prefix + "value", x);
  Var attended = ops::MultiHeadAttention(q, k, v, config.heads);
  return lora::LoraLinear(tape, params, prefix + "output", attended);
}

Var AttentionBlock(Tape& tape, const ParamSet& params, const EncoderConfig& config,
                   int64_t block, const Var& x) {
  const std::string prefix = BlockPrefix(block);
  Var h = ops::Add(x, SelfAttention(tape, params, config, block,
                                    Norm(tape, params, prefix + ".norm1", x)));
  Var mlp = Dense(tape, params, prefix + ".mlp.fc1", Norm(tape, params, prefix + ".norm2", h));
  mlp = Dense(tape, params, prefix + ".mlp.fc2", ops::Gelu(mlp));
  return ops::Add(h, mlp);
}

Var EncodeVar(Tape& tape, const ParamSet& params, const EncoderConfig& config, const Var& input) {
  const Shape& s = input.shape();
  const int64_t edge = config.input_size;
  if (s.size() != 5 || s[1] != 1 || s[2] != edge || s[3] != edge || s[4] != edge) {
    throw ConfigError("encoder expects [N,1," + std::to_string(edge) + "," +
                      std::to_string(edge) + "," + std::to_string(edge) + "], got " +
                      ShapeToString(s));
  }
  Var x = Dense(tape, params, "patch_embed", ops::Patchify(input, config.patch_size));
  x = ops::Add(x, tape.Param(params, "pos_embed"));
  for (int64_t b = 0; b < config.depth; ++b) x = AttentionBlock(tape, params, config, b, x);
  x = Norm(tape, params, "norm", x);
  return ops::Reshape(ops::TransposeLast2(x),
                      {s[0], config.embed_dim, kTokenGrid, kTokenGrid, kTokenGrid});
}

Tensor Encode(const FrozenEncoder& encoder, const Tensor& batch) {
  Tape tape(false);
  return EncodeVar(tape, encoder.params, encoder.config, tape.Constant(batch)).value();
}

int64_t BlockParamCount(const EncoderConfig& config) {
  const int64_t d = config.embed_dim, m = config.mlp_dim();
  return 4 * (d * d + d) + (d * m + m) + (m * d + d) + 4 * d;
}

int64_t ParamCount(const EncoderConfig& config) {
  const int64_t d = config.embed_dim;
  const int64_t p3 = config.patch_size * config.patch_size * config.patch_size;
  return (p3 * d + d) + config.tokens() * d + config.depth * BlockParamCount(config) + 2 * d;
}

int64_t FlopsPerSample(const EncoderConfig& config) {
  const int64_t d = config.embed_dim, m = config.mlp_dim(), t = config.tokens();
  const int64_t p3 = config.patch_size * config.patch_size * config.patch_size;
  const int64_t per_block = 2 * t * d * d * 4 + 2 * t * t * d * 2 + 2 * t * d * m * 2;
  return 2 * t * p3 * d + config.depth * per_block;
}

}  // namespace fedtune::backbone
