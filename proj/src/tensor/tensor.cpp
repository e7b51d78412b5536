// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace fedtune {

std::string ToString(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ",";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ConfigError("tensor extents must be positive, got " + ShapeToString(shape));
    n *= d;
  }
  return n;
}

size_t DTypeSize(DType dtype) { return dtype == DType::kFloat32 ? 4 : 8; }

Tensor::Tensor() : storage_(std::vector<float>(1, 0.0f)) {}

Tensor::Tensor(Shape shape, DType dtype) : dtype_(dtype), shape_(std::move(shape)) {
  const auto n = static_cast<size_t>(NumElements(shape_));
  if (dtype_ == DType::kFloat32) {
    storage_ = std::vector<float>(n, 0.0f);
  } else {
    storage_ = std::vector<double>(n, 0.0);
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : dtype_(DType::kFloat32), shape_(std::move(shape)) {
  if (NumElements(shape_) != static_cast<int64_t>(values.size())) {
    throw ConfigError("shape " + ShapeToString(shape_) + " does not match " +
                      std::to_string(values.size()) + " values");
  }
  storage_ = std::move(values);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : dtype_(DType::kFloat64), shape_(std::move(shape)) {
  if (NumElements(shape_) != static_cast<int64_t>(values.size())) {
    throw ConfigError("shape " + ShapeToString(shape_) + " does not match " +
                      std::to_string(values.size()) + " values");
  }
  storage_ = std::move(values);
}

Tensor Tensor::Scalar(double value, DType dtype) { return Full({}, value, dtype); }

Tensor Tensor::Full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  t.Fill(value);
  return t;
}

int64_t Tensor::numel() const {
  return std::visit([](const auto& v) { return static_cast<int64_t>(v.size()); }, storage_);
}

double Tensor::item(int64_t flat_index) const {
  return std::visit([&](const auto& v) { return static_cast<double>(v.at(flat_index)); },
                    storage_);
}

void Tensor::set_item(int64_t flat_index, double value) {
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v.at(flat_index) = static_cast<T>(value);
      },
      storage_);
}

std::vector<double> Tensor::ToDoubleVector() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); },
                    storage_);
}

Tensor Tensor::Cast(DType dtype) const {
  if (dtype == dtype_) return *this;
  return std::visit(
      [&](const auto& v) -> Tensor {
        if (dtype == DType::kFloat32) return Tensor(shape_, std::vector<float>(v.begin(), v.end()));
        return Tensor(shape_, std::vector<double>(v.begin(), v.end()));
      },
      storage_);
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != numel()) {
    throw ConfigError("cannot reshape " + ShapeToString(shape_) + " to " + ShapeToString(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::Fill(double value) {
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        std::fill(v.begin(), v.end(), static_cast<T>(value));
      },
      storage_);
}

bool Tensor::AllFinite() const {
  return std::visit(
      [](const auto& v) {
        for (auto x : v) {
          if (!std::isfinite(x)) return false;
        }
        return true;
      },
      storage_);
}

bool Tensor::BitEqual(const Tensor& other) const {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  return std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        const auto& w = std::get<V>(other.storage_);
        return std::memcmp(v.data(), w.data(), v.size() * sizeof(typename V::value_type)) == 0;
      },
      storage_);
}

double Tensor::MaxAbsDiff(const Tensor& other) const {
  if (shape_ != other.shape_) {
    throw ConfigError("MaxAbsDiff shape mismatch " + ShapeToString(shape_) + " vs " +
                      ShapeToString(other.shape_));
  }
  double worst = 0.0;
  for (int64_t i = 0; i < numel(); ++i) {
    worst = std::max(worst, std::abs(item(i) - other.item(i)));
  }
  return worst;
}

}  // namespace fedtune
