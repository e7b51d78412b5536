// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_DATA_SYNTH_H_
#define FEDTUNE_DATA_SYNTH_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fedtune/data/cohort.h"
#include "fedtune/data/dataset.h"

namespace fedtune::data {

// Sample of client i with label y in {0, 1}:
//
//   x = m_i u_i + y s v + eta w + sigma eps,   eta ~ N(0, tau^2), eps ~ N(0, I)
//
// u_i, v, w are seeded unit-RMS profiles; w has cosine rho with v. m_i is
// client_shift, times outlier_factor for the outlier cohort. eta models a
// per-scan global intensity change; it lies partly along the class
// direction, so plain Euclidean centroids see it as label noise while a
// trained classifier can learn to project it out.
struct HeterogeneityConfig {
  double class_separation = 1.0;  // s
  double noise = 1.0;             // sigma
  double client_shift = 0.5;      // m
  double outlier_factor = 10.0;
  std::string outlier_client = kOutlierCohort;  // empty: no outlier
  double nuisance = 2.0;              // tau
  double nuisance_correlation = 0.6;  // rho
  uint64_t seed = 0;

  // s = 0: identical class-conditional distributions.
  static HeterogeneityConfig NoSignal();
  void Validate() const;
  bool operator==(const HeterogeneityConfig&) const = default;
};

// Features: profiles run over dim 0 (channels) and are constant over the
// remaining (spatial) dims, the layout of encoder feature maps.
// Volumes: profiles run over every voxel of a [1,S,S,S] scan.
enum class SynthMode { kFeatures, kVolumes };

struct SynthGeometry {
  SynthMode mode = SynthMode::kFeatures;
  Shape sample_shape = {384, 8, 8, 8};

  static SynthGeometry Features(int64_t channels = 384, int64_t spatial = 8);
  static SynthGeometry Volumes(int64_t size);
  int64_t profile_length() const;
};

// Draws one shared set of profiles from (het.seed, geometry); samples are
// produced lazily and deterministically from (seed, cohort, split, index).
class SyntheticFederation {
 public:
  SyntheticFederation(HeterogeneityConfig het, SynthGeometry geometry);

  ClientDataset Client(const CohortSpec& spec, int64_t client_id) const;
  std::vector<ClientDataset> Clients(const std::vector<CohortSpec>& specs) const;

  const HeterogeneityConfig& config() const { return het_; }
  const SynthGeometry& geometry() const { return geometry_; }

  // Unit-RMS profiles (exposed for tests).
  const std::vector<double>& class_profile() const { return *class_; }
  const std::vector<double>& nuisance_profile() const { return *nuisance_; }
  std::vector<double> ClientProfile(const std::string& name) const;
  double ClientShift(const std::string& name) const;

 private:
  HeterogeneityConfig het_;
  SynthGeometry geometry_;
  std::shared_ptr<const std::vector<double>> class_;
  std::shared_ptr<const std::vector<double>> nuisance_;
};

// Convenience wrapper over SyntheticFederation::Client.
ClientDataset GenerateClient(const CohortSpec& spec, const HeterogeneityConfig& het,
                             const SynthGeometry& geometry, int64_t client_id = 0);

}  // namespace fedtune::data

#endif  // FEDTUNE_DATA_SYNTH_H_
