// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/rng.h"

#include <cmath>
#include <numbers>

namespace fedtune {
namespace {

uint64_t Rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t Fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t SplitMix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return Mix64(state);
}

uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t DeriveSeed(uint64_t master_seed, std::string_view purpose, uint64_t client_id,
                    uint64_t round) {
  uint64_t h = Mix64(master_seed ^ 0x6a09e667f3bcc909ULL);
  h = Mix64(h ^ Fnv1a(purpose));
  h = Mix64(h ^ (client_id * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL));
  h = Mix64(h ^ (round * 0xd1b54a32d192ed03ULL + 0xa54ff53a5f1d36f1ULL));
  return h;
}

Rng::Rng(uint64_t seed) {
  uint64_t sm = seed;
  for (auto& word : s_) word = SplitMix64(sm);
}

uint64_t Rng::NextU64() {
  const uint64_t result = Rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = Rotl(s_[3], 45);
  return result;
}

double Rng::Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

uint64_t Rng::Below(uint64_t n) {
  if (n == 0) throw ConfigError("Rng::Below(0)");
  // Lemire-style rejection to avoid modulo bias.
  const uint64_t threshold = (0 - n) % n;
  for (;;) {
    const uint64_t r = NextU64();
    if (r >= threshold) return r % n;
  }
}

double Rng::Gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Tensor SeededInit(const Shape& shape, const InitScheme& scheme, uint64_t seed, DType dtype) {
  Tensor t(shape, dtype);
  switch (scheme.kind) {
    case InitScheme::Kind::kZeros:
      return t;
    case InitScheme::Kind::kOnes:
      t.Fill(1.0);
      return t;
    case InitScheme::Kind::kGaussian:
    case InitScheme::Kind::kUniformKaiming:
      break;
  }
  if (scheme.kind == InitScheme::Kind::kUniformKaiming && scheme.fan_in <= 0) {
    throw ConfigError("kaiming init requires positive fan_in");
  }
  Rng rng(seed);
  const double bound = scheme.kind == InitScheme::Kind::kUniformKaiming
                           ? std::sqrt(6.0 / static_cast<double>(scheme.fan_in))
                           : 0.0;
  DispatchDType(dtype, [&]<typename T>() {
    auto data = t.data<T>();
    for (auto& x : data) {
      const double v = scheme.kind == InitScheme::Kind::kGaussian
                           ? scheme.sigma * rng.Gaussian()
                           : rng.Uniform(-bound, bound);
      x = static_cast<T>(v);
    }
  });
  return t;
}

}  // namespace fedtune
