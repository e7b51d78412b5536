// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TESTS_UNIT_FIXTURES_H_
#define FEDTUNE_TESTS_UNIT_FIXTURES_H_

#include <string>
#include <vector>

#include "fedtune/data/cohort.h"
#include "fedtune/data/synth.h"
#include "fedtune/fed/config.h"
#include "fedtune/model/model.h"

namespace fedtune::testing {

// Small feature maps: 6 channels on a 4^3 grid.
constexpr int64_t kTinyChannels = 6;
constexpr int64_t kTinySpatial = 4;

inline data::SynthGeometry TinyGeometry() {
  return data::SynthGeometry::Features(kTinyChannels, kTinySpatial);
}

inline data::CohortSpec Cohort(std::string name, int64_t train_de, int64_t train_cn,
                               int64_t val_de = 2, int64_t val_cn = 2, int64_t test_de = 3,
                               int64_t test_cn = 3) {
  return {std::move(name), {{{train_de, train_cn}, {val_de, val_cn}, {test_de, test_cn}}}};
}

inline std::vector<data::CohortSpec> SmallCohorts() {
  return {Cohort("A", 5, 4), Cohort("B", 2, 6), Cohort("C", 7, 3)};
}

inline data::HeterogeneityConfig SmallHet(uint64_t seed = 1) {
  data::HeterogeneityConfig het;
  het.outlier_client = "C";
  het.seed = seed;
  return het;
}

inline ModelSpec TinyFeatureSpec(heads::HeadKind kind = heads::HeadKind::kConvS,
                                 DType dtype = DType::kFloat64) {
  ModelSpec spec;
  spec.mode = InputMode::kFeatures;
  spec.head.kind = kind;
  spec.head.in_channels = kTinyChannels;
  spec.head.spatial = kTinySpatial;
  if (kind != heads::HeadKind::kLinear) spec.head.channels = {4, 3, 3, 2};
  spec.regime = Regime::ClsOnly();
  spec.dtype = dtype;
  return spec;
}

inline backbone::EncoderConfig TinyEncoder(uint64_t seed = 3) {
  backbone::EncoderConfig c;
  c.input_size = 16;
  c.patch_size = 2;
  c.embed_dim = 12;
  c.depth = 2;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.seed = seed;
  return c;
}

// Tiny encoder on 16^3 volumes with a Linear head.
inline ModelSpec TinyVolumeSpec(Regime regime, DType dtype = DType::kFloat64) {
  ModelSpec spec;
  spec.mode = InputMode::kVolumes;
  spec.encoder = TinyEncoder();
  spec.head.kind = heads::HeadKind::kLinear;
  spec.head.in_channels = spec.encoder.embed_dim;
  spec.head.spatial = backbone::kTokenGrid;
  spec.regime = std::move(regime);
  spec.dtype = dtype;
  return spec;
}

inline fed::FedConfig SmallFedConfig(agg::Method method = agg::Method::kFedAvg) {
  fed::FedConfig c;
  c.rounds = 3;
  c.batch_size = 4;
  c.lr = 1e-2;
  c.aggregation = method;
  c.seed = 17;
  return c;
}

}  // namespace fedtune::testing

#endif  // FEDTUNE_TESTS_UNIT_FIXTURES_H_
