// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_COMMON_BYTES_H_
#define FEDTUNE_COMMON_BYTES_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedtune/common/errors.h"

namespace fedtune {

// Little-endian encoder appending to a byte vector.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<uint8_t>* out) : out_(out) {}

  void U8(uint8_t v) { out_->push_back(v); }
  void U16(uint16_t v) { Le(v); }
  void U32(uint32_t v) { Le(v); }
  void U64(uint64_t v) { Le(v); }
  void F64(double v) { Le(std::bit_cast<uint64_t>(v)); }
  void Bytes(std::string_view s) { out_->insert(out_->end(), s.begin(), s.end()); }

  template <typename T>
  void Array(std::span<const T> values) {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const uint8_t*>(values.data());
      out_->insert(out_->end(), p, p + values.size_bytes());
    } else {
      for (T v : values) {
        using U = std::conditional_t<sizeof(T) == 8, uint64_t, uint32_t>;
        Le(std::bit_cast<U>(v));
      }
    }
  }

  size_t size() const { return out_->size(); }

 private:
  template <typename U>
  void Le(U v) {
    for (size_t i = 0; i < sizeof(U); ++i) out_->push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t>* out_;
};

// Little-endian decoder over a byte span. Every read is bounds-checked and
// failures name the field and offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t U8(const char* field) { return Le<uint8_t>(field); }
  uint16_t U16(const char* field) { return Le<uint16_t>(field); }
  uint32_t U32(const char* field) { return Le<uint32_t>(field); }
  uint64_t U64(const char* field) { return Le<uint64_t>(field); }
  double F64(const char* field) { return std::bit_cast<double>(Le<uint64_t>(field)); }
  std::string Bytes(size_t n, const char* field) {
    Need(n, field);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  template <typename T>
  void Array(std::span<T> out, const char* field) {
    Need(out.size_bytes(), field);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      using U = std::conditional_t<sizeof(T) == 8, uint64_t, uint32_t>;
      for (T& v : out) v = std::bit_cast<T>(Le<U>(field));
    }
  }

  size_t position() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(size_t n, const char* field) {
    if (data_.size() - pos_ < n) {
      throw FormatError("truncated input reading " + std::string(field) + " at byte " +
                        std::to_string(pos_) + ": need " + std::to_string(n) + ", have " +
                        std::to_string(data_.size() - pos_));
    }
  }
  template <typename U>
  U Le(const char* field) {
    Need(sizeof(U), field);
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace fedtune

#endif  // FEDTUNE_COMMON_BYTES_H_
