// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/model/model.h"

#include "fedtune/tensor/rng.h"

namespace fedtune {

std::string Regime::Name() const {
  switch (kind) {
    case Kind::kFull:
      return "Full";
    case Kind::kClsOnly:
      return "ClsOnly";
    case Kind::kLora:
      return "LoRA-" + selector.Name();
  }
  return "?";
}

Regime Regime::Parse(const std::string& name, int64_t rank) {
  if (name == "Full") return Full();
  if (name == "ClsOnly") return ClsOnly();
  if (name.starts_with("LoRA-")) return Lora(lora::BlockSelector::Parse(name.substr(5)), rank);
  throw ConfigError("unknown regime '" + name +
                    "' (expected Full, ClsOnly, LoRA-All, LoRA-First6, LoRA-Last6)");
}

std::string ToString(InputMode mode) {
  return mode == InputMode::kFeatures ? "features" : "volumes";
}

InputMode ParseInputMode(const std::string& name) {
  if (name == "features") return InputMode::kFeatures;
  if (name == "volumes") return InputMode::kVolumes;
  throw ConfigError("unknown data mode '" + name + "' (expected features, volumes)");
}

void ModelSpec::Validate() const {
  head.Validate();
  if (mode == InputMode::kFeatures) {
    if (regime.kind != Regime::Kind::kClsOnly) {
      throw ConfigError("regime " + regime.Name() +
                        " trains the encoder and needs data mode 'volumes'");
    }
    return;
  }
  encoder.Validate();
  if (head.in_channels != encoder.embed_dim || head.spatial != backbone::kTokenGrid) {
    throw ConfigError("head input does not match the encoder output");
  }
  if (regime.kind == Regime::Kind::kLora) regime.selector.Resolve(encoder.depth);
}

Shape ModelSpec::InputShape(int64_t batch) const {
  if (mode == InputMode::kFeatures) {
    return {batch, head.in_channels, head.spatial, head.spatial, head.spatial};
  }
  const int64_t s = encoder.input_size;
  return {batch, 1, s, s, s};
}

Model BuildModel(const ModelSpec& spec, uint64_t seed) {
  spec.Validate();
  Model model{spec, {}};
  if (spec.mode == InputMode::kVolumes) {
    backbone::AddEncoderParams(spec.encoder, spec.dtype, model.params);
    if (spec.regime.kind == Regime::Kind::kFull) backbone::SetTrainable(model.params, true);
    if (spec.regime.kind == Regime::Kind::kLora) {
      lora::InjectLora(model.params, spec.encoder, spec.regime.selector, spec.regime.rank,
                       DeriveSeed(seed, "lora"));
    }
  }
  for (auto& entry : heads::BuildHead(spec.head, DeriveSeed(seed, "head"), spec.dtype)) {
    model.params.Add(entry.name, entry.tensor, entry.trainable);
  }
  return model;
}

Var ModelForward(Tape& tape, const Model& model, const Var& input) {
  Var features = input;
  if (model.spec.mode == InputMode::kVolumes) {
    features = backbone::EncodeVar(tape, model.params, model.spec.encoder, input);
  }
  return heads::HeadForward(tape, model.params, model.spec.head, features);
}

Tensor Predict(const Model& model, const Tensor& input) {
  Tape tape(false);
  return ModelForward(tape, model, tape.Constant(input)).value();
}

ParamSet ExtractTrainable(const Model& model) { return model.params.Trainable(); }

int64_t TrainableParamCount(const ModelSpec& spec) {
  int64_t count = heads::HeadParamCount(spec.head);
  switch (spec.regime.kind) {
    case Regime::Kind::kFull:
      count += backbone::ParamCount(spec.encoder);
      break;
    case Regime::Kind::kLora:
      count += lora::LoraParamCount(spec.regime.selector, spec.encoder, spec.regime.rank);
      break;
    case Regime::Kind::kClsOnly:
      break;
  }
  return count;
}

int64_t FlopsPerSample(const ModelSpec& spec) {
  int64_t flops = heads::HeadFlopsPerSample(spec.head);
  if (spec.mode == InputMode::kVolumes) flops += backbone::FlopsPerSample(spec.encoder);
  if (spec.regime.kind == Regime::Kind::kLora) {
    // x A then (x A) B for each adapted projection.
    const int64_t adapters =
        4 * static_cast<int64_t>(spec.regime.selector.Resolve(spec.encoder.depth).size());
    flops += adapters * spec.encoder.tokens() * 2 * spec.regime.rank * 2 * spec.encoder.embed_dim;
  }
  return flops;
}

}  // namespace fedtune
