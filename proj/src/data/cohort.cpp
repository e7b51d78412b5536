// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/data/cohort.h"

#include "fedtune/common/errors.h"

namespace fedtune::data {

std::string ToString(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

void CohortSpec::Validate() const {
  if (name.empty()) throw ConfigError("cohort name must not be empty");
  for (const auto& c : splits) {
    if (c.de < 0 || c.cn < 0) throw ConfigError("cohort " + name + " has negative counts");
  }
}

std::vector<CohortSpec> BuiltinFederation() {
  //        name        train (DE, CN)  val (DE, CN)  test (DE, CN)
  return {
      {"ADNI", {{{240, 516}, {40, 86}, {121, 258}}}},
      {"NIFD", {{{98, 74}, {17, 12}, {49, 38}}}},
      {"OASIS", {{{224, 28}, {37, 5}, {113, 14}}}},
      {"NACC", {{{683, 1262}, {113, 211}, {342, 632}}}},
      {"BrainLAT", {{{210, 106}, {35, 18}, {105, 54}}}},
      {"PND", {{{119, 82}, {20, 13}, {60, 41}}}},
  };
}

}  // namespace fedtune::data
