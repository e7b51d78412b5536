// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/fed/wire.h"

#include <cstring>
#include <limits>

#include "fedtune/common/bytes.h"

namespace fedtune::fed {
namespace {

constexpr size_t kMaxDims = 8;

size_t TrailerBytes(MessageKind kind) {
  switch (kind) {
    case MessageKind::kGlobalModel:
      return 0;
    case MessageKind::kClientUpdate:
      return kClientTrailerBytes;
    case MessageKind::kNccStats:
      return kNccTrailerBytes;
  }
  return 0;
}

void WriteTensors(ByteWriter& w, const ParamSet& params) {
  w.U32(static_cast<uint32_t>(params.size()));
  for (const auto& e : params) {
    if (e.name.empty() || e.name.size() > std::numeric_limits<uint16_t>::max()) {
      throw ConfigError("tensor name length must be in [1, 65535]");
    }
    w.U16(static_cast<uint16_t>(e.name.size()));
    w.Bytes(e.name);
    w.U8(static_cast<uint8_t>(e.tensor.dtype()));
    w.U8(static_cast<uint8_t>(e.tensor.ndim()));
    for (int64_t d : e.tensor.shape()) w.U32(static_cast<uint32_t>(d));
  }
  for (const auto& e : params) {
    DispatchDType(e.tensor.dtype(), [&]<typename T>() { w.Array(e.tensor.data<T>()); });
  }
}

ParamSet ReadTensors(ByteReader& r) {
  const uint32_t count = r.U32("tensor count");
  struct Dir {
    std::string name;
    DType dtype;
    Shape shape;
  };
  std::vector<Dir> dir;
  for (uint32_t i = 0; i < count; ++i) {
    Dir d;
    const uint16_t len = r.U16("name length");
    if (len == 0) throw FormatError("tensor " + std::to_string(i) + " has an empty name");
    d.name = r.Bytes(len, "tensor name");
    const uint8_t dtype = r.U8("dtype");
    if (dtype > 1) {
      throw FormatError("tensor '" + d.name + "' has unknown dtype code " + std::to_string(dtype));
    }
    d.dtype = static_cast<DType>(dtype);
    const uint8_t ndim = r.U8("ndim");
    if (ndim > kMaxDims) throw FormatError("tensor '" + d.name + "' has " + std::to_string(ndim) + " dims");
    for (uint8_t k = 0; k < ndim; ++k) {
      const uint32_t extent = r.U32("dim");
      if (extent == 0) throw FormatError("tensor '" + d.name + "' has a zero extent");
      d.shape.push_back(extent);
    }
    dir.push_back(std::move(d));
  }
  ParamSet params;
  for (auto& d : dir) {
    Tensor t(d.shape, d.dtype);
    DispatchDType(d.dtype, [&]<typename T>() { r.Array(t.data<T>(), "tensor data"); });
    if (params.Contains(d.name)) throw FormatError("duplicate tensor name '" + d.name + "'");
    params.Add(d.name, std::move(t), true);
  }
  return params;
}

}  // namespace

std::string ToString(MessageKind kind) {
  switch (kind) {
    case MessageKind::kGlobalModel:
      return "GLOBAL_MODEL";
    case MessageKind::kClientUpdate:
      return "CLIENT_UPDATE";
    case MessageKind::kNccStats:
      return "NCC_STATS";
  }
  return "?";
}

std::vector<uint8_t> SerializeParams(const ParamSet& params) {
  std::vector<uint8_t> out;
  ByteWriter w(&out);
  WriteTensors(w, params);
  return out;
}

ParamSet DeserializeParams(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  ParamSet params = ReadTensors(r);
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after tensor data");
  }
  return params;
}

std::vector<uint8_t> Encode(const WireMessage& m) {
  std::vector<uint8_t> payload;
  ByteWriter p(&payload);
  WriteTensors(p, m.tensors);
  if (m.kind == MessageKind::kClientUpdate) {
    p.U32(m.client.client_id);
    p.U64(m.client.n_train);
    p.F64(m.client.val_loss);
    p.F64(m.client.val_acc);
    p.F64(m.client.val_auc);
    p.F64(m.client.update_norm);
  } else if (m.kind == MessageKind::kNccStats) {
    p.U64(m.ncc.count_de);
    p.U64(m.ncc.count_cn);
  }
  if (payload.size() > std::numeric_limits<uint32_t>::max()) {
    throw ConfigError("message payload exceeds 4 GiB");
  }
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + payload.size());
  ByteWriter h(&out);
  h.Bytes(std::string_view(kWireMagic, 4));
  h.U32(kWireVersion);
  h.U8(static_cast<uint8_t>(m.kind));
  h.U32(m.round);
  h.U32(static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

WireMessage Decode(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const std::string magic = r.Bytes(4, "magic");
  if (std::memcmp(magic.data(), kWireMagic, 4) != 0) throw FormatError("bad magic (expected FFM1)");
  const uint32_t version = r.U32("version");
  if (version != kWireVersion) {
    throw FormatError("unsupported wire version " + std::to_string(version));
  }
  const uint8_t kind = r.U8("kind");
  if (kind > 2) throw FormatError("unknown message kind " + std::to_string(kind));
  WireMessage m;
  m.kind = static_cast<MessageKind>(kind);
  m.round = r.U32("round");
  const uint32_t payload = r.U32("payload length");
  if (r.remaining() != payload) {
    throw FormatError("payload length field says " + std::to_string(payload) + " bytes, " +
                      std::to_string(r.remaining()) + " present");
  }
  m.tensors = ReadTensors(r);
  if (r.remaining() != TrailerBytes(m.kind)) {
    throw FormatError(ToString(m.kind) + " trailer must be " +
                      std::to_string(TrailerBytes(m.kind)) + " bytes, got " +
                      std::to_string(r.remaining()));
  }
  if (m.kind == MessageKind::kClientUpdate) {
    m.client.client_id = r.U32("client id");
    m.client.n_train = r.U64("n_train");
    m.client.val_loss = r.F64("val loss");
    m.client.val_acc = r.F64("val accuracy");
    m.client.val_auc = r.F64("val AUC");
    m.client.update_norm = r.F64("update norm");
  } else if (m.kind == MessageKind::kNccStats) {
    m.ncc.count_de = r.U64("count DE");
    m.ncc.count_cn = r.U64("count CN");
  }
  return m;
}

size_t EncodedSize(MessageKind kind, const ParamSet& tensors) {
  size_t n = kHeaderBytes + 4;
  for (const auto& e : tensors) {
    n += 2 + e.name.size() + 1 + 1 + 4 * e.tensor.shape().size();
    n += e.tensor.nbytes();
  }
  return n + TrailerBytes(kind);
}

}  // namespace fedtune::fed
