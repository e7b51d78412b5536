// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_MODEL_MODEL_H_
#define FEDTUNE_MODEL_MODEL_H_

#include <cstdint>
#include <string>

#include "fedtune/backbone/encoder.h"
#include "fedtune/heads/head.h"
#include "fedtune/lora/lora.h"

namespace fedtune {

// Fine-tuning regime: which tensors are trainable.
struct Regime {
  enum class Kind { kFull, kClsOnly, kLora };
  Kind kind = Kind::kClsOnly;
  lora::BlockSelector selector;
  int64_t rank = lora::kDefaultRank;

  static Regime Full() { return {Kind::kFull, {}, lora::kDefaultRank}; }
  static Regime ClsOnly() { return {Kind::kClsOnly, {}, lora::kDefaultRank}; }
  static Regime Lora(lora::BlockSelector selector, int64_t rank = lora::kDefaultRank) {
    return {Kind::kLora, std::move(selector), rank};
  }

  // "Full", "ClsOnly", "LoRA-All", "LoRA-First6", "LoRA-Last6".
  std::string Name() const;
  static Regime Parse(const std::string& name, int64_t rank = lora::kDefaultRank);

  bool operator==(const Regime&) const = default;
};

// kFeatures: model input is a precomputed encoder feature map and the model
// is the head alone. kVolumes: model input is a raw volume passed through the
// encoder.
enum class InputMode { kFeatures, kVolumes };

std::string ToString(InputMode mode);
InputMode ParseInputMode(const std::string& name);

struct ModelSpec {
  InputMode mode = InputMode::kFeatures;
  backbone::EncoderConfig encoder;
  heads::HeadConfig head;
  Regime regime;
  DType dtype = DType::kFloat32;

  // Head input must match the encoder output; Full and LoRA need volumes.
  void Validate() const;
  Shape InputShape(int64_t batch) const;
};

// Encoder tensors (volumes mode), then LoRA factors, then head tensors, in
// one ParamSet with trainable flags set by the regime.
struct Model {
  ModelSpec spec;
  ParamSet params;
};

Model BuildModel(const ModelSpec& spec, uint64_t seed);

Var ModelForward(Tape& tape, const Model& model, const Var& input);
Tensor Predict(const Model& model, const Tensor& input);

// The tensors a client trains and transmits under the model's regime.
ParamSet ExtractTrainable(const Model& model);

// Closed-form trainable count for a spec (no model is built).
int64_t TrainableParamCount(const ModelSpec& spec);
int64_t FlopsPerSample(const ModelSpec& spec);

}  // namespace fedtune

#endif  // FEDTUNE_MODEL_MODEL_H_
