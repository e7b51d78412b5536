// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_DATA_COHORT_H_
#define FEDTUNE_DATA_COHORT_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fedtune::data {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kSplits = {Split::kTrain, Split::kVal, Split::kTest};

std::string ToString(Split split);

// Label convention: 1 = dementia (DE), 0 = cognitively normal (CN).
constexpr int kLabelDE = 1;
constexpr int kLabelCN = 0;

struct LabelCounts {
  int64_t de = 0;
  int64_t cn = 0;
  int64_t total() const { return de + cn; }
  bool operator==(const LabelCounts&) const = default;
};

struct CohortSpec {
  std::string name;
  std::array<LabelCounts, 3> splits;  // indexed by Split

  const LabelCounts& counts(Split s) const { return splits[static_cast<size_t>(s)]; }
  void Validate() const;
  bool operator==(const CohortSpec&) const = default;
};

// The six cohorts with their per-split DE/CN counts: ADNI, NIFD, OASIS,
// NACC, BrainLAT, PND.
std::vector<CohortSpec> BuiltinFederation();

// Name of the cohort whose acquisition differs most from the rest.
inline constexpr const char* kOutlierCohort = "BrainLAT";

}  // namespace fedtune::data

#endif  // FEDTUNE_DATA_COHORT_H_
