// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/baselines/baselines.h"

#include <cmath>
#include <memory>

#include "fedtune/common/parallel.h"
#include "fedtune/fed/wire.h"
#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/tape.h"

namespace fedtune::baselines {
namespace {

// Neumaier running sum per coordinate.
class CompensatedVector {
 public:
  explicit CompensatedVector(size_t n) : sum_(n, 0.0), comp_(n, 0.0) {}

  void Add(std::span<const double> v) {
    for (size_t k = 0; k < sum_.size(); ++k) {
      const double t = sum_[k] + v[k];
      comp_[k] += std::abs(sum_[k]) >= std::abs(v[k]) ? (sum_[k] - t) + v[k] : (v[k] - t) + sum_[k];
      sum_[k] = t;
    }
  }

  std::vector<double> Result() const {
    std::vector<double> out(sum_.size());
    for (size_t k = 0; k < out.size(); ++k) out[k] = sum_[k] + comp_[k];
    return out;
  }

 private:
  std::vector<double> sum_, comp_;
};

double Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double Distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double n = Norm(a) * Norm(b);
  if (n == 0.0) return 0.0;
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s / n;
}

Tensor VectorTensor(const std::vector<double>& v) {
  return Tensor({static_cast<int64_t>(v.size())}, v);
}

}  // namespace

FeatureExtractor PooledFeatures(const Model& model) {
  auto shared = std::make_shared<const Model>(model);
  const int64_t dim = model.spec.mode == InputMode::kVolumes ? model.spec.encoder.embed_dim
                                                             : model.spec.head.in_channels;
  return {dim, [shared](const Tensor& batch) {
            Tape tape(false);
            Var x = tape.Constant(batch.dtype() == shared->spec.dtype ? batch : batch.Cast(shared->spec.dtype));
            if (shared->spec.mode == InputMode::kVolumes) {
              x = backbone::EncodeVar(tape, shared->params, shared->spec.encoder, x);
            }
            return ops::GlobalAvgPool3d(x).value().Cast(DType::kFloat64);
          }};
}

NccStats ClientNccStats(const data::SampleSource& train, const FeatureExtractor& g,
                        int64_t batch_size) {
  const size_t dim = static_cast<size_t>(g.dim);
  CompensatedVector de(dim), cn(dim);
  NccStats stats;
  for (int64_t begin = 0; begin < train.size(); begin += batch_size) {
    std::vector<int64_t> idx;
    for (int64_t i = begin; i < std::min(train.size(), begin + batch_size); ++i) idx.push_back(i);
    const Tensor z = g.fn(data::Gather(train, idx, DType::kFloat64));
    if (z.ndim() != 2 || z.dim(1) != g.dim) {
      throw ConfigError("feature extractor returned " + ShapeToString(z.shape()) + ", expected [B, " +
                        std::to_string(g.dim) + "]");
    }
    const auto v = z.data<double>();
    for (size_t r = 0; r < idx.size(); ++r) {
      const std::span<const double> row(v.data() + r * dim, dim);
      if (train.label(idx[r]) == data::kLabelDE) {
        de.Add(row);
        ++stats.count_de;
      } else {
        cn.Add(row);
        ++stats.count_cn;
      }
    }
  }
  stats.sum_de = de.Result();
  stats.sum_cn = cn.Result();
  return stats;
}

std::vector<uint8_t> EncodeNccStats(const NccStats& stats, uint32_t round) {
  fed::WireMessage m;
  m.kind = fed::MessageKind::kNccStats;
  m.round = round;
  m.tensors.Add("sum_DE", VectorTensor(stats.sum_de), true);
  m.tensors.Add("sum_CN", VectorTensor(stats.sum_cn), true);
  m.ncc = {stats.count_de, stats.count_cn};
  return fed::Encode(m);
}

NccStats DecodeNccStats(std::span<const uint8_t> bytes) {
  const fed::WireMessage m = fed::Decode(bytes);
  if (m.kind != fed::MessageKind::kNccStats) {
    throw FormatError("expected NCC_STATS, got " + fed::ToString(m.kind));
  }
  if (m.tensors.size() != 2 || !m.tensors.Contains("sum_DE") || !m.tensors.Contains("sum_CN")) {
    throw FormatError("NCC_STATS must carry exactly the tensors sum_DE and sum_CN");
  }
  const Tensor& de = m.tensors.at("sum_DE");
  const Tensor& cn = m.tensors.at("sum_CN");
  if (de.ndim() != 1 || de.shape() != cn.shape() || de.dtype() != DType::kFloat64 ||
      cn.dtype() != DType::kFloat64) {
    throw FormatError("NCC_STATS sums must be float64 vectors of equal length");
  }
  return {de.ToDoubleVector(), cn.ToDoubleVector(), m.ncc.count_de, m.ncc.count_cn};
}

Centroids ServerCentroids(std::span<const NccStats> stats) {
  if (stats.empty()) throw ConfigError("no NCC statistics to reduce");
  const size_t dim = stats[0].sum_de.size();
  CompensatedVector de(dim), cn(dim);
  uint64_t n_de = 0, n_cn = 0;
  for (const auto& s : stats) {
    if (s.sum_de.size() != dim || s.sum_cn.size() != dim) {
      throw ConfigError("NCC statistics differ in feature dimension");
    }
    de.Add(s.sum_de);
    cn.Add(s.sum_cn);
    n_de += s.count_de;
    n_cn += s.count_cn;
  }
  if (n_de == 0 || n_cn == 0) {
    throw ConfigError(std::string("NCC centroid undefined: no ") + (n_de == 0 ? "DE" : "CN") +
                      " samples in any client");
  }
  Centroids c{de.Result(), cn.Result()};
  for (double& x : c.de) x /= static_cast<double>(n_de);
  for (double& x : c.cn) x /= static_cast<double>(n_cn);
  return c;
}

double NccScore(std::span<const double> z, const Centroids& c, NccMetric metric) {
  if (c.de.empty() || c.cn.empty() || c.de.size() != z.size() || c.cn.size() != z.size()) {
    throw ConfigError("NCC score needs both centroids with the feature dimension");
  }
  if (metric == NccMetric::kCosine) return Cosine(z, c.de) - Cosine(z, c.cn);
  return Distance(z, c.cn) - Distance(z, c.de);
}

std::vector<double> NccScores(const data::SampleSource& source, const FeatureExtractor& g,
                              const Centroids& c, NccMetric metric) {
  std::vector<double> scores;
  const size_t dim = static_cast<size_t>(g.dim);
  for (int64_t begin = 0; begin < source.size(); begin += fed::kEvalBatch) {
    std::vector<int64_t> idx;
    for (int64_t i = begin; i < std::min(source.size(), begin + fed::kEvalBatch); ++i) idx.push_back(i);
    const Tensor z = g.fn(data::Gather(source, idx, DType::kFloat64));
    const auto v = z.data<double>();
    for (size_t r = 0; r < idx.size(); ++r) {
      scores.push_back(NccScore(std::span<const double>(v.data() + r * dim, dim), c, metric));
    }
  }
  return scores;
}

FederatedNccResult RunFederatedNcc(std::span<const data::ClientDataset> clients,
                                   const FeatureExtractor& g, int threads) {
  if (clients.empty()) throw ConfigError("federated NCC needs at least one client");
  std::vector<std::vector<uint8_t>> messages(clients.size());
  ParallelFor(clients.size(), threads, [&](size_t i) {
    messages[i] = EncodeNccStats(ClientNccStats(clients[i].split(data::Split::kTrain), g));
  });
  FederatedNccResult result;
  for (const auto& m : messages) {
    result.stats.push_back(DecodeNccStats(m));
    result.bytes_up.push_back(m.size());
  }
  result.centroids = ServerCentroids(result.stats);
  return result;
}

data::ClientDataset PoolClients(std::span<const data::ClientDataset> clients,
                                const std::string& name) {
  if (clients.empty()) throw ConfigError("nothing to pool");
  data::ClientDataset pooled;
  pooled.client_id = 0;
  pooled.name = name;
  for (data::Split s : data::kSplits) {
    std::vector<std::shared_ptr<const data::SampleSource>> parts;
    for (const auto& c : clients) parts.push_back(c.splits[static_cast<size_t>(s)]);
    pooled.splits[static_cast<size_t>(s)] = std::make_shared<data::ConcatSource>(std::move(parts));
  }
  return pooled;
}

fed::FederationResult CentralizedTrain(std::span<const data::ClientDataset> clients,
                                       const ModelSpec& spec, const fed::FedConfig& config) {
  const std::vector<data::ClientDataset> pooled = {PoolClients(clients)};
  return fed::RunFederation(pooled, spec, config);
}

}  // namespace fedtune::baselines
