// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/param_set.h"

namespace fedtune {

void ParamSet::Add(std::string name, Tensor tensor, bool trainable) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor), trainable});
}

void ParamSet::Remove(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].name, i);
}

bool ParamSet::Contains(const std::string& name) const { return index_.count(name) > 0; }

ParamEntry& ParamSet::Entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return entries_[it->second];
}

const ParamEntry& ParamSet::Entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return entries_[it->second];
}

std::vector<std::string> ParamSet::Names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.push_back(e.name);
  return names;
}

void ParamSet::SetTrainable(const std::function<bool(const std::string&)>& predicate,
                            bool flag) {
  for (auto& e : entries_) {
    if (predicate(e.name)) e.trainable = flag;
  }
}

ParamSet ParamSet::Trainable() const {
  ParamSet out;
  for (const auto& e : entries_) {
    if (e.trainable) out.Add(e.name, e.tensor, true);
  }
  return out;
}

int64_t ParamSet::NumElements(bool trainable_only) const {
  int64_t n = 0;
  for (const auto& e : entries_) {
    if (!trainable_only || e.trainable) n += e.tensor.numel();
  }
  return n;
}

void ParamSet::AssignValues(const ParamSet& values) {
  for (const auto& v : values) {
    auto& dst = Entry(v.name).tensor;
    if (dst.shape() != v.tensor.shape() || dst.dtype() != v.tensor.dtype()) {
      throw ConfigError("parameter '" + v.name + "' expects " + ToString(dst.dtype()) +
                        ShapeToString(dst.shape()) + ", got " + ToString(v.tensor.dtype()) +
                        ShapeToString(v.tensor.shape()));
    }
    dst = v.tensor;
  }
}

bool ParamSet::SameStructure(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape() ||
        a.tensor.dtype() != b.tensor.dtype()) {
      return false;
    }
  }
  return true;
}

bool ParamSet::BitEqual(const ParamSet& other) const {
  if (!SameStructure(other)) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].tensor.BitEqual(other.entries_[i].tensor)) return false;
  }
  return true;
}

std::vector<double> ParamSet::Flatten() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(NumElements()));
  for (const auto& e : entries_) {
    auto v = e.tensor.ToDoubleVector();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

}  // namespace fedtune
