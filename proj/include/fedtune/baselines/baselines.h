// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_BASELINES_BASELINES_H_
#define FEDTUNE_BASELINES_BASELINES_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedtune/data/dataset.h"
#include "fedtune/fed/config.h"
#include "fedtune/fed/protocol.h"
#include "fedtune/model/model.h"

namespace fedtune::baselines {

// Maps a batch of inputs to pooled features [B, dim] in float64.
struct FeatureExtractor {
  int64_t dim = 0;
  std::function<Tensor(const Tensor&)> fn;
};

// Global average pool of the frozen encoder output (volumes) or of the
// stored feature maps (features). Only frozen parameters are read.
FeatureExtractor PooledFeatures(const Model& model);

struct NccStats {
  std::vector<double> sum_de;
  std::vector<double> sum_cn;
  uint64_t count_de = 0;
  uint64_t count_cn = 0;
  bool operator==(const NccStats&) const = default;
};

NccStats ClientNccStats(const data::SampleSource& train, const FeatureExtractor& g,
                        int64_t batch_size = fed::kEvalBatch);

// NCC_STATS message with tensors "sum_DE" and "sum_CN" (float64).
std::vector<uint8_t> EncodeNccStats(const NccStats& stats, uint32_t round = 0);
NccStats DecodeNccStats(std::span<const uint8_t> bytes);

struct Centroids {
  std::vector<double> de;
  std::vector<double> cn;
};

// mu_c = (sum over clients of sums) / (sum of counts), compensated.
// Throws ConfigError when a class has no samples anywhere.
Centroids ServerCentroids(std::span<const NccStats> stats);

enum class NccMetric { kEuclidean, kCosine };

// Euclidean: ||z - mu_CN|| - ||z - mu_DE||. Cosine: cos(z, mu_DE) - cos(z, mu_CN).
// Positive means closer to DE.
double NccScore(std::span<const double> z, const Centroids& c,
                NccMetric metric = NccMetric::kEuclidean);

std::vector<double> NccScores(const data::SampleSource& source, const FeatureExtractor& g,
                              const Centroids& c, NccMetric metric = NccMetric::kEuclidean);

struct FederatedNccResult {
  Centroids centroids;
  std::vector<NccStats> stats;
  std::vector<uint64_t> bytes_up;  // per client
};

// Every client computes its stats on its training split and ships them as
// an NCC_STATS message; the server decodes and reduces.
FederatedNccResult RunFederatedNcc(std::span<const data::ClientDataset> clients,
                                   const FeatureExtractor& g, int threads = 1);

// All splits of all clients concatenated into one client with id 0.
data::ClientDataset PoolClients(std::span<const data::ClientDataset> clients,
                                const std::string& name = "Pooled");

// The federated trainer run on the pooled client: R rounds of local_epochs
// with optimizer reset per round, exactly as a one-client federation.
fed::FederationResult CentralizedTrain(std::span<const data::ClientDataset> clients,
                                       const ModelSpec& spec, const fed::FedConfig& config);

}  // namespace fedtune::baselines

#endif  // FEDTUNE_BASELINES_BASELINES_H_
