// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/lora/lora.h"

#include <algorithm>
#include <cmath>

#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::lora {
namespace {

constexpr int64_t kHalfDepth = 6;

}  // namespace

std::vector<int64_t> BlockSelector::Resolve(int64_t depth) const {
  std::vector<int64_t> out;
  switch (kind) {
    case Kind::kAll:
      for (int64_t b = 0; b < depth; ++b) out.push_back(b);
      break;
    case Kind::kFirst6:
    case Kind::kLast6: {
      if (depth < kHalfDepth) {
        throw ConfigError("selector " + Name() + " needs at least 6 blocks, encoder has " +
                          std::to_string(depth));
      }
      const int64_t start = kind == Kind::kFirst6 ? 0 : depth - kHalfDepth;
      for (int64_t b = start; b < start + kHalfDepth; ++b) out.push_back(b);
      break;
    }
    case Kind::kExplicit:
      for (int64_t b : blocks) {
        if (b < 0 || b >= depth) {
          throw ConfigError("block index " + std::to_string(b) + " outside [0, " +
                            std::to_string(depth) + ")");
        }
        out.push_back(b);
      }
      break;
  }
  return out;
}

std::string BlockSelector::Name() const {
  switch (kind) {
    case Kind::kAll:
      return "All";
    case Kind::kFirst6:
      return "First6";
    case Kind::kLast6:
      return "Last6";
    case Kind::kExplicit:
      return "Explicit";
  }
  return "?";
}

BlockSelector BlockSelector::Parse(const std::string& name) {
  if (name == "All") return All();
  if (name == "First6") return First6();
  if (name == "Last6") return Last6();
  throw ConfigError("unknown LoRA block selector '" + name + "' (expected All, First6, Last6)");
}

std::string FactorName(int64_t block, const std::string& projection, char factor) {
  return backbone::BlockPrefix(block) + "." + projection + ".lora_" + factor;
}

bool IsLoraName(const std::string& name) {
  return name.ends_with(".lora_A") || name.ends_with(".lora_B");
}

bool HasAdapters(const ParamSet& params) {
  return std::any_of(params.begin(), params.end(),
                     [](const ParamEntry& e) { return IsLoraName(e.name); });
}

void InjectLora(ParamSet& params, const backbone::EncoderConfig& config,
                const BlockSelector& selector, int64_t rank, uint64_t seed) {
  const int64_t d = config.embed_dim;
  if (rank < 1 || rank > d / 4) {
    throw ConfigError("LoRA rank " + std::to_string(rank) + " outside [1, " +
                      std::to_string(d / 4) + "]");
  }
  if (HasAdapters(params)) throw ConfigError("encoder already carries LoRA adapters");
  const std::vector<int64_t> blocks = selector.Resolve(config.depth);
  const DType dtype = params.at("patch_embed.weight").dtype();
  const double sigma = 1.0 / std::sqrt(static_cast<double>(rank));
  for (int64_t b : blocks) {
    for (const char* proj : backbone::kProjections) {
      const std::string a_name = FactorName(b, proj, 'A');
      params.Add(a_name,
                 SeededInit({d, rank}, InitScheme::Gaussian(sigma), DeriveSeed(seed, "lora/" + a_name),
                            dtype),
                 true);
      params.Add(FactorName(b, proj, 'B'), Tensor({rank, d}, dtype), true);
    }
  }
}

void InjectLora(backbone::FrozenEncoder& encoder, const BlockSelector& selector, int64_t rank) {
  InjectLora(encoder.params, encoder.config, selector, rank, encoder.config.seed);
}

void MergeLora(ParamSet& params) {
  std::vector<std::string> prefixes;
  for (const auto& e : params) {
    if (e.name.ends_with(".lora_A")) prefixes.push_back(e.name.substr(0, e.name.size() - 7));
  }
  if (prefixes.empty()) throw ConfigError("no LoRA adapters to merge");
  for (const auto& prefix : prefixes) {
    const Tensor a = params.at(prefix + ".lora_A");
    const Tensor b = params.at(prefix + ".lora_B");
    Tensor& w = params.at(prefix + ".weight");
    const int64_t rows = a.dim(0), rank = a.dim(1), cols = b.dim(1);
    const std::vector<double> av = a.ToDoubleVector(), bv = b.ToDoubleVector();
    DispatchDType(w.dtype(), [&]<typename T>() {
      auto wv = w.data<T>();
      for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) {
          double delta = 0.0;
          for (int64_t r = 0; r < rank; ++r) delta += av[i * rank + r] * bv[r * cols + j];
          wv[i * cols + j] = static_cast<T>(static_cast<double>(wv[i * cols + j]) + delta);
        }
      }
    });
    params.Remove(prefix + ".lora_A");
    params.Remove(prefix + ".lora_B");
  }
}

void MergeLora(backbone::FrozenEncoder& encoder) { MergeLora(encoder.params); }

Var LoraLinear(Tape& tape, const ParamSet& params, const std::string& prefix, const Var& x) {
  Var base = ops::Linear(x, tape.Param(params, prefix + ".weight"),
                         tape.Param(params, prefix + ".bias"));
  if (!params.Contains(prefix + ".lora_A")) return base;
  Var low = ops::MatMul(x, tape.Param(params, prefix + ".lora_A"));
  return ops::Add(base, ops::MatMul(low, tape.Param(params, prefix + ".lora_B")));
}

int64_t LoraParamCount(const BlockSelector& selector, const backbone::EncoderConfig& config,
                       int64_t rank) {
  const int64_t blocks = static_cast<int64_t>(selector.Resolve(config.depth).size());
  return blocks * 4 * rank * (config.embed_dim + config.embed_dim);
}

}  // namespace fedtune::lora
