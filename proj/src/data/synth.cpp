// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/data/synth.h"

#include <cmath>

#include "fedtune/common/errors.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::data {
namespace {

std::vector<double> UnitRms(std::vector<double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  const double scale = std::sqrt(static_cast<double>(v.size()) / ss);
  for (double& x : v) x *= scale;
  return v;
}

std::vector<double> GaussianProfile(uint64_t seed, int64_t n) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.Gaussian();
  return UnitRms(std::move(v));
}

class SyntheticSource : public SampleSource {
 public:
  SyntheticSource(std::string cohort, Split split, LabelCounts counts,
                  const HeterogeneityConfig& het, const SynthGeometry& geometry,
                  std::vector<double> client_offset, std::shared_ptr<const std::vector<double>> cls,
                  std::shared_ptr<const std::vector<double>> nuisance)
      : prefix_(cohort + "/" + ToString(split)),
        counts_(counts),
        het_(het),
        geometry_(geometry),
        stream_seed_(DeriveSeed(het.seed, "sample/" + prefix_)),
        offset_(std::move(client_offset)),
        class_(std::move(cls)),
        nuisance_(std::move(nuisance)) {}

  int64_t size() const override { return counts_.total(); }
  const Shape& sample_shape() const override { return geometry_.sample_shape; }
  int label(int64_t i) const override { return i < counts_.de ? kLabelDE : kLabelCN; }
  std::string id(int64_t i) const override { return prefix_ + "/" + std::to_string(i); }

  void Write(int64_t i, Tensor& batch, int64_t row) const override {
    const int64_t per = NumElements(geometry_.sample_shape);
    const int64_t plen = geometry_.profile_length();
    const int64_t repeat = per / plen;
    Rng rng(DeriveSeed(stream_seed_, "", static_cast<uint64_t>(i)));
    const double eta = het_.nuisance * rng.Gaussian();
    const double signal = label(i) == kLabelDE ? het_.class_separation : 0.0;
    DispatchDType(batch.dtype(), [&]<typename T>() {
      auto out = batch.data<T>().subspan(row * per, per);
      for (int64_t p = 0; p < plen; ++p) {
        const double base = offset_[p] + signal * (*class_)[p] + eta * (*nuisance_)[p];
        for (int64_t r = 0; r < repeat; ++r) {
          out[p * repeat + r] = static_cast<T>(base + het_.noise * rng.Gaussian());
        }
      }
    });
  }

 private:
  std::string prefix_;
  LabelCounts counts_;
  HeterogeneityConfig het_;
  SynthGeometry geometry_;
  uint64_t stream_seed_;
  std::vector<double> offset_;
  std::shared_ptr<const std::vector<double>> class_;
  std::shared_ptr<const std::vector<double>> nuisance_;
};

}  // namespace

HeterogeneityConfig HeterogeneityConfig::NoSignal() {
  HeterogeneityConfig het;
  het.class_separation = 0.0;
  return het;
}

void HeterogeneityConfig::Validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError(std::string(name) + " must be finite and nonnegative");
    }
  };
  check(class_separation, "class_separation");
  check(noise, "noise");
  check(client_shift, "client_shift");
  check(outlier_factor, "outlier_factor");
  check(nuisance, "nuisance");
  if (!(nuisance_correlation >= -1.0 && nuisance_correlation <= 1.0)) {
    throw ConfigError("nuisance_correlation must lie in [-1, 1]");
  }
}

SynthGeometry SynthGeometry::Features(int64_t channels, int64_t spatial) {
  return {SynthMode::kFeatures, {channels, spatial, spatial, spatial}};
}

SynthGeometry SynthGeometry::Volumes(int64_t size) {
  return {SynthMode::kVolumes, {1, size, size, size}};
}

int64_t SynthGeometry::profile_length() const {
  return mode == SynthMode::kFeatures ? sample_shape.at(0) : NumElements(sample_shape);
}

SyntheticFederation::SyntheticFederation(HeterogeneityConfig het, SynthGeometry geometry)
    : het_(std::move(het)), geometry_(std::move(geometry)) {
  het_.Validate();
  NumElements(geometry_.sample_shape);
  const int64_t n = geometry_.profile_length();
  std::vector<double> v = GaussianProfile(DeriveSeed(het_.seed, "profile/class"), n);
  // Orthogonalize a second draw against v, then mix to cosine rho.
  std::vector<double> q = GaussianProfile(DeriveSeed(het_.seed, "profile/nuisance"), n);
  double dot = 0.0;
  for (int64_t p = 0; p < n; ++p) dot += q[p] * v[p];
  for (int64_t p = 0; p < n; ++p) q[p] -= dot / static_cast<double>(n) * v[p];
  q = UnitRms(std::move(q));
  const double rho = het_.nuisance_correlation;
  std::vector<double> w(n);
  for (int64_t p = 0; p < n; ++p) w[p] = rho * v[p] + std::sqrt(1.0 - rho * rho) * q[p];
  class_ = std::make_shared<const std::vector<double>>(std::move(v));
  nuisance_ = std::make_shared<const std::vector<double>>(std::move(w));
}

std::vector<double> SyntheticFederation::ClientProfile(const std::string& name) const {
  return GaussianProfile(DeriveSeed(het_.seed, "profile/client/" + name),
                         geometry_.profile_length());
}

double SyntheticFederation::ClientShift(const std::string& name) const {
  return het_.client_shift * (name == het_.outlier_client ? het_.outlier_factor : 1.0);
}

ClientDataset SyntheticFederation::Client(const CohortSpec& spec, int64_t client_id) const {
  spec.Validate();
  std::vector<double> offset = ClientProfile(spec.name);
  const double shift = ClientShift(spec.name);
  for (double& x : offset) x *= shift;
  ClientDataset ds{client_id, spec.name, {}};
  for (Split s : kSplits) {
    ds.splits[static_cast<size_t>(s)] = std::make_shared<SyntheticSource>(
        spec.name, s, spec.counts(s), het_, geometry_, offset, class_, nuisance_);
  }
  return ds;
}

std::vector<ClientDataset> SyntheticFederation::Clients(const std::vector<CohortSpec>& specs) const {
  std::vector<ClientDataset> out;
  for (size_t i = 0; i < specs.size(); ++i) out.push_back(Client(specs[i], static_cast<int64_t>(i)));
  return out;
}

ClientDataset GenerateClient(const CohortSpec& spec, const HeterogeneityConfig& het,
                             const SynthGeometry& geometry, int64_t client_id) {
  return SyntheticFederation(het, geometry).Client(spec, client_id);
}

}  // namespace fedtune::data
