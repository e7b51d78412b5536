// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_DATA_DATASET_H_
#define FEDTUNE_DATA_DATASET_H_

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtune/data/cohort.h"
#include "fedtune/tensor/tensor.h"

namespace fedtune::data {

// Read-only indexed collection of labeled samples of one fixed shape.
// Implementations must be safe for concurrent reads.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual int64_t size() const = 0;
  virtual const Shape& sample_shape() const = 0;
  virtual int label(int64_t i) const = 0;
  // Globally unique id, e.g. "ADNI/train/17".
  virtual std::string id(int64_t i) const = 0;
  // Writes sample i into row `row` of `batch` ([B, sample_shape...]).
  virtual void Write(int64_t i, Tensor& batch, int64_t row) const = 0;
};

// [indices.size(), sample_shape...] in the requested dtype.
Tensor Gather(const SampleSource& source, std::span<const int64_t> indices, DType dtype);
std::vector<int> GatherLabels(const SampleSource& source, std::span<const int64_t> indices);

// Samples held in one [n, ...] tensor.
class InMemorySource : public SampleSource {
 public:
  // `samples` has shape [n, sample_shape...]; n == labels.size().
  InMemorySource(std::string prefix, Tensor samples, std::vector<int> labels);
  // Empty source of the given sample shape.
  InMemorySource(std::string prefix, Shape sample_shape, DType dtype);

  int64_t size() const override { return static_cast<int64_t>(labels_.size()); }
  const Shape& sample_shape() const override { return sample_shape_; }
  int label(int64_t i) const override { return labels_.at(i); }
  std::string id(int64_t i) const override;
  void Write(int64_t i, Tensor& batch, int64_t row) const override;

  const Tensor& samples() const { return samples_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  std::string prefix_;
  Shape sample_shape_;
  Tensor samples_;
  std::vector<int> labels_;
};

// Concatenation of several sources with identical sample shapes; sample i
// of part k keeps its original id.
class ConcatSource : public SampleSource {
 public:
  explicit ConcatSource(std::vector<std::shared_ptr<const SampleSource>> parts);

  int64_t size() const override { return offsets_.back(); }
  const Shape& sample_shape() const override { return sample_shape_; }
  int label(int64_t i) const override;
  std::string id(int64_t i) const override;
  void Write(int64_t i, Tensor& batch, int64_t row) const override;

 private:
  std::pair<size_t, int64_t> Locate(int64_t i) const;

  std::vector<std::shared_ptr<const SampleSource>> parts_;
  std::vector<int64_t> offsets_;
  Shape sample_shape_;
};

// Copies every sample of `source` into memory.
std::shared_ptr<const InMemorySource> Materialize(const SampleSource& source, DType dtype);

struct ClientDataset {
  int64_t client_id = 0;
  std::string name;
  std::array<std::shared_ptr<const SampleSource>, 3> splits;  // indexed by Split

  const SampleSource& split(Split s) const;
  LabelCounts counts(Split s) const;
};

}  // namespace fedtune::data

#endif  // FEDTUNE_DATA_DATASET_H_
