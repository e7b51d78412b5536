// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/data/feature_file.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fedtune/common/bytes.h"
#include "fedtune/common/errors.h"

namespace fedtune::data {
namespace {

namespace fs = std::filesystem;

constexpr int64_t kHeaderBytes = 12;
constexpr int64_t kSampleHeaderBytes = 1 + 16;

int64_t FeatureValues() { return NumElements(kFeatureShape); }
int64_t RecordBytes() { return kSampleHeaderBytes + 4 * FeatureValues(); }

std::ifstream OpenForRead(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file '" + path + "'");
  return in;
}

std::vector<uint8_t> ReadExactly(std::ifstream& in, int64_t offset, int64_t n,
                                 const std::string& path) {
  std::vector<uint8_t> buf(static_cast<size_t>(n));
  in.seekg(offset);
  in.read(reinterpret_cast<char*>(buf.data()), n);
  if (in.gcount() != n) {
    throw FormatError("feature file '" + path + "' truncated at byte " +
                      std::to_string(offset + in.gcount()));
  }
  return buf;
}

// Parses the 12-byte header and returns the sample count.
uint32_t ParseHeader(std::span<const uint8_t> bytes, const std::string& path) {
  ByteReader r(bytes);
  const std::string magic = r.Bytes(4, "magic");
  if (std::memcmp(magic.data(), kFeatureMagic, 4) != 0) {
    throw FormatError("feature file '" + path + "' has bad magic (expected FDT1)");
  }
  const uint32_t version = r.U32("version");
  if (version != kFeatureVersion) {
    throw FormatError("feature file '" + path + "' has version " + std::to_string(version) +
                      ", expected " + std::to_string(kFeatureVersion));
  }
  return r.U32("count");
}

int ParseSampleHeader(std::span<const uint8_t> bytes, int64_t index, const std::string& path) {
  ByteReader r(bytes);
  const uint8_t label = r.U8("label");
  if (label > 1) {
    throw FormatError("sample " + std::to_string(index) + " of '" + path + "' has label " +
                      std::to_string(label));
  }
  for (int d = 0; d < 4; ++d) {
    const uint32_t extent = r.U32("shape");
    if (extent != static_cast<uint64_t>(kFeatureShape[d])) {
      throw FormatError("sample " + std::to_string(index) + " of '" + path +
                        "' has shape other than 384x8x8x8");
    }
  }
  return label;
}

void CheckSize(int64_t actual, uint32_t count, const std::string& path) {
  const int64_t expected = kHeaderBytes + static_cast<int64_t>(count) * RecordBytes();
  if (actual < expected) {
    throw FormatError("feature file '" + path + "' truncated: " + std::to_string(actual) +
                      " bytes, header declares " + std::to_string(count) + " samples (" +
                      std::to_string(expected) + " bytes)");
  }
  if (actual > expected) {
    throw FormatError("feature file '" + path + "' has " + std::to_string(actual - expected) +
                      " trailing bytes");
  }
}

class FeatureFileSource : public SampleSource {
 public:
  FeatureFileSource(std::string path, std::string prefix)
      : path_(std::move(path)), prefix_(std::move(prefix)) {
    std::ifstream in = OpenForRead(path_);
    in.seekg(0, std::ios::end);
    const int64_t file_size = in.tellg();
    const uint32_t count = ParseHeader(ReadExactly(in, 0, kHeaderBytes, path_), path_);
    CheckSize(file_size, count, path_);
    labels_.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      const int64_t offset = kHeaderBytes + static_cast<int64_t>(i) * RecordBytes();
      labels_.push_back(
          ParseSampleHeader(ReadExactly(in, offset, kSampleHeaderBytes, path_), i, path_));
    }
  }

  int64_t size() const override { return static_cast<int64_t>(labels_.size()); }
  const Shape& sample_shape() const override { return kFeatureShape; }
  int label(int64_t i) const override { return labels_.at(i); }
  std::string id(int64_t i) const override { return prefix_ + "/" + std::to_string(i); }

  void Write(int64_t i, Tensor& batch, int64_t row) const override {
    std::ifstream in = OpenForRead(path_);
    const int64_t offset = kHeaderBytes + i * RecordBytes() + kSampleHeaderBytes;
    const std::vector<uint8_t> bytes = ReadExactly(in, offset, 4 * FeatureValues(), path_);
    std::vector<float> values(FeatureValues());
    ByteReader(bytes).Array(std::span<float>(values), "values");
    const int64_t per = FeatureValues();
    DispatchDType(batch.dtype(), [&]<typename T>() {
      auto out = batch.data<T>().subspan(row * per, per);
      for (int64_t k = 0; k < per; ++k) out[k] = static_cast<T>(values[k]);
    });
  }

 private:
  std::string path_;
  std::string prefix_;
  std::vector<int> labels_;
};

class SliceSource : public SampleSource {
 public:
  SliceSource(std::shared_ptr<const SampleSource> base, int64_t begin, int64_t count,
              std::string prefix)
      : base_(std::move(base)), begin_(begin), count_(count), prefix_(std::move(prefix)) {
    if (begin < 0 || count < 0 || begin + count > base_->size()) {
      throw ConfigError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                        ") exceeds source of size " + std::to_string(base_->size()));
    }
  }
  int64_t size() const override { return count_; }
  const Shape& sample_shape() const override { return base_->sample_shape(); }
  int label(int64_t i) const override { return base_->label(Map(i)); }
  std::string id(int64_t i) const override { return prefix_ + "/" + std::to_string(i); }
  void Write(int64_t i, Tensor& batch, int64_t row) const override {
    base_->Write(Map(i), batch, row);
  }

 private:
  int64_t Map(int64_t i) const {
    if (i < 0 || i >= count_) throw ConfigError("slice index out of range");
    return begin_ + i;
  }
  std::shared_ptr<const SampleSource> base_;
  int64_t begin_;
  int64_t count_;
  std::string prefix_;
};

}  // namespace

void SaveFeatures(const std::string& path, const SampleSource& source) {
  if (source.sample_shape() != kFeatureShape) {
    throw ConfigError("feature files hold 384x8x8x8 samples, source has " +
                      ShapeToString(source.sample_shape()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write feature file '" + path + "'");
  std::vector<uint8_t> buf;
  ByteWriter w(&buf);
  w.Bytes(std::string_view(kFeatureMagic, 4));
  w.U32(kFeatureVersion);
  w.U32(static_cast<uint32_t>(source.size()));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  for (int64_t i = 0; i < source.size(); ++i) {
    const int64_t idx[] = {i};
    const Tensor sample = Gather(source, idx, DType::kFloat32);
    buf.clear();
    w.U8(static_cast<uint8_t>(source.label(i)));
    for (int64_t extent : kFeatureShape) w.U32(static_cast<uint32_t>(extent));
    w.Array(std::span<const float>(sample.data<float>()));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::shared_ptr<const InMemorySource> LoadExternalFeatures(const std::string& path,
                                                           const std::string& prefix) {
  std::ifstream in = OpenForRead(path);
  in.seekg(0, std::ios::end);
  const int64_t file_size = in.tellg();
  if (file_size < kHeaderBytes) {
    throw FormatError("feature file '" + path + "' truncated: " + std::to_string(file_size) +
                      " bytes");
  }
  const std::vector<uint8_t> bytes = ReadExactly(in, 0, file_size, path);
  const std::span<const uint8_t> all(bytes);
  const uint32_t count = ParseHeader(all.first(kHeaderBytes), path);
  CheckSize(file_size, count, path);
  if (count == 0) return std::make_shared<InMemorySource>(prefix, kFeatureShape, DType::kFloat32);
  const int64_t per = FeatureValues();
  Shape shape{static_cast<int64_t>(count)};
  shape.insert(shape.end(), kFeatureShape.begin(), kFeatureShape.end());
  Tensor samples(shape, DType::kFloat32);
  std::vector<int> labels;
  for (uint32_t i = 0; i < count; ++i) {
    const size_t offset = kHeaderBytes + static_cast<size_t>(i) * RecordBytes();
    labels.push_back(ParseSampleHeader(all.subspan(offset, kSampleHeaderBytes), i, path));
    ByteReader r(all.subspan(offset + kSampleHeaderBytes, 4 * per));
    r.Array(samples.data<float>().subspan(static_cast<size_t>(i) * per, per), "values");
  }
  return std::make_shared<InMemorySource>(prefix, std::move(samples), std::move(labels));
}

std::shared_ptr<const SampleSource> OpenFeatureFile(const std::string& path,
                                                    const std::string& prefix) {
  return std::make_shared<FeatureFileSource>(path, prefix);
}

std::shared_ptr<const SampleSource> Slice(std::shared_ptr<const SampleSource> base, int64_t begin,
                                          int64_t count, std::string prefix) {
  return std::make_shared<SliceSource>(std::move(base), begin, count, std::move(prefix));
}

void WriteManifest(const std::string& path, const Manifest& manifest) {
  nlohmann::ordered_json clients = nlohmann::ordered_json::array();
  for (const auto& e : manifest.clients) {
    clients.push_back({{"name", e.name},
                       {"path", e.path},
                       {"train", e.train},
                       {"val", e.val},
                       {"test", e.test}});
  }
  nlohmann::ordered_json doc = {{"version", 1}, {"clients", clients}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  auto check_keys = [&](const nlohmann::json& obj, const std::set<std::string>& allowed,
                        const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
    for (const auto& key : allowed) {
      if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
    }
  };
  check_keys(doc, {"version", "clients"}, "manifest");
  if (doc["version"] != 1) throw ConfigError("unsupported manifest version");
  Manifest m;
  for (const auto& c : doc["clients"]) {
    check_keys(c, {"name", "path", "train", "val", "test"}, "manifest client");
    try {
      ManifestEntry e{c["name"].get<std::string>(), c["path"].get<std::string>(),
                      c["train"].get<int64_t>(), c["val"].get<int64_t>(), c["test"].get<int64_t>()};
      if (e.train < 0 || e.val < 0 || e.test < 0) {
        throw ConfigError("negative split size for client " + e.name);
      }
      m.clients.push_back(std::move(e));
    } catch (const nlohmann::json::type_error& err) {
      throw ConfigError("manifest client entry has a wrongly typed field: " +
                        std::string(err.what()));
    }
  }
  return m;
}

std::vector<ClientDataset> LoadManifestClients(const std::string& manifest_path) {
  const Manifest m = ReadManifest(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  std::vector<ClientDataset> out;
  for (size_t i = 0; i < m.clients.size(); ++i) {
    const ManifestEntry& e = m.clients[i];
    fs::path file(e.path);
    if (file.is_relative()) file = dir / file;
    auto base = OpenFeatureFile(file.string(), e.name);
    if (base->size() != e.train + e.val + e.test) {
      throw ConfigError("client " + e.name + ": manifest declares " +
                        std::to_string(e.train + e.val + e.test) + " samples, file holds " +
                        std::to_string(base->size()));
    }
    ClientDataset ds{static_cast<int64_t>(i), e.name, {}};
    ds.splits[0] = Slice(base, 0, e.train, e.name + "/train");
    ds.splits[1] = Slice(base, e.train, e.val, e.name + "/val");
    ds.splits[2] = Slice(base, e.train + e.val, e.test, e.name + "/test");
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace fedtune::data
