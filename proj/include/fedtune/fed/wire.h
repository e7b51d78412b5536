// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_FED_WIRE_H_
#define FEDTUNE_FED_WIRE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedtune/tensor/param_set.h"

namespace fedtune::fed {

// Message layout (little-endian):
//   header     "FFM1" | u32 version | u8 kind | u32 round | u32 payload length
//   directory  u32 count | count x (u16 name length | name | u8 dtype |
//                                   u8 ndim | u32 x ndim dims)
//   data       tensor values in directory order
//   trailer    CLIENT_UPDATE: u32 client | u64 n_train | f64 val loss, acc,
//                             AUC | f64 update norm
//              NCC_STATS:     u64 count DE | u64 count CN
// The payload length counts every byte after the header.
enum class MessageKind : uint8_t { kGlobalModel = 0, kClientUpdate = 1, kNccStats = 2 };

inline constexpr char kWireMagic[4] = {'F', 'F', 'M', '1'};
constexpr uint32_t kWireVersion = 1;
constexpr size_t kHeaderBytes = 17;
constexpr size_t kClientTrailerBytes = 4 + 8 + 4 * 8;
constexpr size_t kNccTrailerBytes = 16;

std::string ToString(MessageKind kind);

struct ClientTrailer {
  uint32_t client_id = 0;
  uint64_t n_train = 0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double val_auc = 0.0;
  double update_norm = 0.0;
  bool operator==(const ClientTrailer&) const = default;
};

struct NccTrailer {
  uint64_t count_de = 0;
  uint64_t count_cn = 0;
  bool operator==(const NccTrailer&) const = default;
};

struct WireMessage {
  MessageKind kind = MessageKind::kGlobalModel;
  uint32_t round = 0;
  ParamSet tensors;  // decoded tensors are marked trainable
  ClientTrailer client;  // kClientUpdate only
  NccTrailer ncc;        // kNccStats only
};

std::vector<uint8_t> Encode(const WireMessage& message);
// Throws FormatError naming the offending field on bad magic, version,
// kind, dtype, declared lengths, duplicate names or truncation.
WireMessage Decode(std::span<const uint8_t> bytes);

// Directory plus data section only.
std::vector<uint8_t> SerializeParams(const ParamSet& params);
ParamSet DeserializeParams(std::span<const uint8_t> bytes);

// Byte count of Encode() computed from shapes alone.
size_t EncodedSize(MessageKind kind, const ParamSet& tensors);

}  // namespace fedtune::fed

#endif  // FEDTUNE_FED_WIRE_H_
