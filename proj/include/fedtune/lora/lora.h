// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_LORA_LORA_H_
#define FEDTUNE_LORA_LORA_H_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fedtune/backbone/encoder.h"
#include "fedtune/tensor/param_set.h"
#include "fedtune/tensor/tape.h"

namespace fedtune::lora {

// Which attention blocks receive adapters.
struct BlockSelector {
  enum class Kind { kAll, kFirst6, kLast6, kExplicit };
  Kind kind = Kind::kAll;
  std::set<int64_t> blocks;  // kExplicit only

  static BlockSelector All() { return {Kind::kAll, {}}; }
  static BlockSelector First6() { return {Kind::kFirst6, {}}; }
  static BlockSelector Last6() { return {Kind::kLast6, {}}; }
  static BlockSelector Explicit(std::set<int64_t> blocks) {
    return {Kind::kExplicit, std::move(blocks)};
  }

  // Sorted block indices; throws ConfigError when out of [0, depth).
  std::vector<int64_t> Resolve(int64_t depth) const;
  // "All", "First6", "Last6" or "Explicit".
  std::string Name() const;
  static BlockSelector Parse(const std::string& name);

  bool operator==(const BlockSelector&) const = default;
};

constexpr int64_t kDefaultRank = 8;

std::string FactorName(int64_t block, const std::string& projection, char factor);
bool IsLoraName(const std::string& name);
bool HasAdapters(const ParamSet& params);

// Adds A [d,r] ~ gaussian(1/sqrt r) and B [r,k] = 0 to the four projections
// of every selected block. Factors are trainable; nothing else changes.
// Throws ConfigError on a bad selector, rank outside [1, min(d,k)/4], or if
// adapters are already present.
void InjectLora(ParamSet& params, const backbone::EncoderConfig& config,
                const BlockSelector& selector, int64_t rank, uint64_t seed);
void InjectLora(backbone::FrozenEncoder& encoder, const BlockSelector& selector,
                int64_t rank = kDefaultRank);

// W <- W + A B for every adapted projection, then removes the factors.
// Throws ConfigError when there are no adapters.
void MergeLora(ParamSet& params);
void MergeLora(backbone::FrozenEncoder& encoder);

// x W + b, plus (x A) B when `prefix`.lora_A/B exist in params.
Var LoraLinear(Tape& tape, const ParamSet& params, const std::string& prefix, const Var& x);

// |blocks| * 4 * r * (d + k) with d = k = embed_dim.
int64_t LoraParamCount(const BlockSelector& selector, const backbone::EncoderConfig& config,
                       int64_t rank);

}  // namespace fedtune::lora

#endif  // FEDTUNE_LORA_LORA_H_
