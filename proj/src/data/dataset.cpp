// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/data/dataset.h"

#include <algorithm>
#include <cstring>

#include "fedtune/common/errors.h"

namespace fedtune::data {
namespace {

Shape WithBatch(int64_t n, const Shape& sample_shape) {
  Shape s{n};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  return s;
}

}  // namespace

Tensor Gather(const SampleSource& source, std::span<const int64_t> indices, DType dtype) {
  Tensor batch(WithBatch(static_cast<int64_t>(indices.size()), source.sample_shape()), dtype);
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= source.size()) {
      throw ConfigError("sample index " + std::to_string(indices[r]) + " out of range");
    }
    source.Write(indices[r], batch, static_cast<int64_t>(r));
  }
  return batch;
}

std::vector<int> GatherLabels(const SampleSource& source, std::span<const int64_t> indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (int64_t i : indices) labels.push_back(source.label(i));
  return labels;
}

InMemorySource::InMemorySource(std::string prefix, Tensor samples, std::vector<int> labels)
    : prefix_(std::move(prefix)), samples_(std::move(samples)), labels_(std::move(labels)) {
  if (samples_.ndim() < 1 || samples_.dim(0) != static_cast<int64_t>(labels_.size())) {
    throw ConfigError("sample tensor " + ShapeToString(samples_.shape()) + " does not hold " +
                      std::to_string(labels_.size()) + " samples");
  }
  sample_shape_.assign(samples_.shape().begin() + 1, samples_.shape().end());
}

InMemorySource::InMemorySource(std::string prefix, Shape sample_shape, DType dtype)
    : prefix_(std::move(prefix)), sample_shape_(std::move(sample_shape)), samples_(Tensor({1}, dtype)) {
  NumElements(sample_shape_);
}

std::string InMemorySource::id(int64_t i) const { return prefix_ + "/" + std::to_string(i); }

void InMemorySource::Write(int64_t i, Tensor& batch, int64_t row) const {
  const int64_t per = NumElements(sample_shape_);
  DispatchDType(batch.dtype(), [&]<typename Out>() {
    auto dst = batch.data<Out>().subspan(row * per, per);
    DispatchDType(samples_.dtype(), [&]<typename In>() {
      auto src = samples_.data<In>().subspan(i * per, per);
      std::transform(src.begin(), src.end(), dst.begin(),
                     [](In v) { return static_cast<Out>(v); });
    });
  });
}

std::shared_ptr<const InMemorySource> Materialize(const SampleSource& source, DType dtype) {
  std::vector<int64_t> all(source.size());
  for (int64_t i = 0; i < source.size(); ++i) all[i] = i;
  std::string prefix = source.size() > 0 ? source.id(0) : "empty";
  prefix = prefix.substr(0, prefix.rfind('/'));
  if (all.empty()) return std::make_shared<InMemorySource>(prefix, source.sample_shape(), dtype);
  return std::make_shared<InMemorySource>(prefix, Gather(source, all, dtype),
                                          GatherLabels(source, all));
}

const SampleSource& ClientDataset::split(Split s) const {
  const auto& ptr = splits[static_cast<size_t>(s)];
  if (!ptr) throw ConfigError("client " + name + " has no " + ToString(s) + " split");
  return *ptr;
}

LabelCounts ClientDataset::counts(Split s) const {
  LabelCounts c;
  const SampleSource& src = split(s);
  for (int64_t i = 0; i < src.size(); ++i) (src.label(i) == kLabelDE ? c.de : c.cn)++;
  return c;
}

ConcatSource::ConcatSource(std::vector<std::shared_ptr<const SampleSource>> parts)
    : parts_(std::move(parts)), offsets_{0} {
  if (parts_.empty()) throw ConfigError("concatenation of zero sources");
  sample_shape_ = parts_[0]->sample_shape();
  for (const auto& p : parts_) {
    if (p->sample_shape() != sample_shape_) {
      throw ConfigError("cannot concatenate samples of shape " + ShapeToString(p->sample_shape()) +
                        " and " + ShapeToString(sample_shape_));
    }
    offsets_.push_back(offsets_.back() + p->size());
  }
}

std::pair<size_t, int64_t> ConcatSource::Locate(int64_t i) const {
  if (i < 0 || i >= size()) throw ConfigError("sample index " + std::to_string(i) + " out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
  const size_t k = static_cast<size_t>(it - offsets_.begin()) - 1;
  return {k, i - offsets_[k]};
}

int ConcatSource::label(int64_t i) const {
  const auto [k, j] = Locate(i);
  return parts_[k]->label(j);
}

std::string ConcatSource::id(int64_t i) const {
  const auto [k, j] = Locate(i);
  return parts_[k]->id(j);
}

void ConcatSource::Write(int64_t i, Tensor& batch, int64_t row) const {
  const auto [k, j] = Locate(i);
  parts_[k]->Write(j, batch, row);
}

}  // namespace fedtune::data
