// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_TENSOR_RNG_H_
#define FEDTUNE_TENSOR_RNG_H_

#include <array>
#include <cstdint>
#include <string_view>

#include "fedtune/tensor/tensor.h"

namespace fedtune {

// SplitMix64 finalizer. Used for seeding and seed derivation only.
uint64_t SplitMix64(uint64_t& state);
uint64_t Mix64(uint64_t x);

// Derives an independent stream seed from (master, purpose, client, round).
// The result depends only on the arguments, never on call order, so clients
// can be scheduled in any order or in parallel.
uint64_t DeriveSeed(uint64_t master_seed, std::string_view purpose, uint64_t client_id = 0,
                    uint64_t round = 0);

// xoshiro256** 1.0 (Blackman & Vigna), state expanded from a 64-bit seed
// with SplitMix64. Gaussian draws use the Box-Muller transform on 53-bit
// uniform doubles; the second value of each pair is cached.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n);
  double Gaussian();

 private:
  std::array<uint64_t, 4> s_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct InitScheme {
  enum class Kind { kZeros, kOnes, kGaussian, kUniformKaiming };
  Kind kind = Kind::kZeros;
  double sigma = 1.0;   // kGaussian
  int64_t fan_in = 1;   // kUniformKaiming: U(-sqrt(6/fan_in), sqrt(6/fan_in))

  static InitScheme Zeros() { return {Kind::kZeros}; }
  static InitScheme Ones() { return {Kind::kOnes}; }
  static InitScheme Gaussian(double sigma) { return {Kind::kGaussian, sigma}; }
  static InitScheme UniformKaiming(int64_t fan_in) { return {Kind::kUniformKaiming, 1.0, fan_in}; }
};

// Values are drawn in double precision in row-major order and then rounded
// to the requested dtype, so a float32 and float64 init with the same seed
// agree to float32 precision.
Tensor SeededInit(const Shape& shape, const InitScheme& scheme, uint64_t seed,
                  DType dtype = DType::kFloat32);

}  // namespace fedtune

#endif  // FEDTUNE_TENSOR_RNG_H_
