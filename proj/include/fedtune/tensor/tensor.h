// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_TENSOR_H_
#define FEDTUNE_TENSOR_TENSOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "fedtune/common/errors.h"

namespace fedtune {

enum class DType : uint8_t { kFloat32 = 0, kFloat64 = 1 };

using Shape = std::vector<int64_t>;

std::string ToString(DType dtype);
std::string ShapeToString(const Shape& shape);
int64_t NumElements(const Shape& shape);
size_t DTypeSize(DType dtype);

template <typename T>
constexpr DType DTypeOf() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
}

// Dense row-major tensor with a runtime element type. Values are owned and
// copied on assignment.
class Tensor {
 public:
  Tensor();
  // Zero-filled tensor.
  Tensor(Shape shape, DType dtype);
  Tensor(Shape shape, std::vector<float> values);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Scalar(double value, DType dtype);
  static Tensor Full(Shape shape, double value, DType dtype);

  DType dtype() const { return dtype_; }
  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t ndim() const { return shape_.size(); }
  int64_t numel() const;
  size_t nbytes() const { return static_cast<size_t>(numel()) * DTypeSize(dtype_); }

  template <typename T>
  std::span<T> data() {
    CheckType<T>();
    return std::span<T>(std::get<std::vector<T>>(storage_));
  }
  template <typename T>
  std::span<const T> data() const {
    CheckType<T>();
    return std::span<const T>(std::get<std::vector<T>>(storage_));
  }

  // Element access by flat index, converted to double.
  double item(int64_t flat_index) const;
  void set_item(int64_t flat_index, double value);

  std::vector<double> ToDoubleVector() const;
  Tensor Cast(DType dtype) const;
  // Same data, new shape with equal element count.
  Tensor Reshaped(Shape shape) const;

  void Fill(double value);
  bool AllFinite() const;
  // Same dtype, shape and bit pattern of every element.
  bool BitEqual(const Tensor& other) const;
  double MaxAbsDiff(const Tensor& other) const;

 private:
  template <typename T>
  void CheckType() const {
    if (dtype_ != DTypeOf<T>()) {
      throw ConfigError("tensor dtype is " + ToString(dtype_) + ", accessed as " +
                        ToString(DTypeOf<T>()));
    }
  }

  DType dtype_ = DType::kFloat32;
  Shape shape_;
  std::variant<std::vector<float>, std::vector<double>> storage_;
};

// Invokes fn.template operator()<T>() with T matching dtype.
template <typename Fn>
decltype(auto) DispatchDType(DType dtype, Fn&& fn) {
  if (dtype == DType::kFloat32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

}  // namespace fedtune

#endif  // FEDTUNE_TENSOR_TENSOR_H_
