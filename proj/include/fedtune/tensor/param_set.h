// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_PARAM_SET_H_
#define FEDTUNE_TENSOR_PARAM_SET_H_

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedtune/tensor/tensor.h"

namespace fedtune {

struct ParamEntry {
  std::string name;
  Tensor tensor;
  bool trainable = false;
};

// Ordered name -> tensor map. Iteration order is insertion order, so two
// models built from the same config enumerate parameters identically.
class ParamSet {
 public:
  ParamSet() = default;

  void Add(std::string name, Tensor tensor, bool trainable);
  // Removes the entry; throws if absent.
  void Remove(const std::string& name);
  bool Contains(const std::string& name) const;

  ParamEntry& Entry(const std::string& name);
  const ParamEntry& Entry(const std::string& name) const;
  Tensor& at(const std::string& name) { return Entry(name).tensor; }
  const Tensor& at(const std::string& name) const { return Entry(name).tensor; }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> Names() const;
  void SetTrainable(const std::function<bool(const std::string&)>& predicate, bool flag);

  // Copy of the trainable entries only, in order.
  ParamSet Trainable() const;
  int64_t NumElements(bool trainable_only = false) const;

  // Overwrites values of the named entries; every name in `values` must exist
  // here with an identical shape and dtype.
  void AssignValues(const ParamSet& values);

  // Same names, order, shapes and dtypes.
  bool SameStructure(const ParamSet& other) const;
  // SameStructure plus bit-identical values.
  bool BitEqual(const ParamSet& other) const;

  // Concatenation of all values in order, as doubles.
  std::vector<double> Flatten() const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace fedtune

#endif  // FEDTUNE_TENSOR_PARAM_SET_H_
