// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_DATA_FEATURE_FILE_H_
#define FEDTUNE_DATA_FEATURE_FILE_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fedtune/data/dataset.h"

namespace fedtune::data {

// Feature file layout (little-endian):
//   "FDT1" | u32 version = 1 | u32 count |
//   count x ( u8 label | u32 x 4 shape = 384,8,8,8 | f32 x 196608 values )
inline constexpr char kFeatureMagic[4] = {'F', 'D', 'T', '1'};
constexpr uint32_t kFeatureVersion = 1;
inline const Shape kFeatureShape = {384, 8, 8, 8};

// Writes every sample of `source` (which must have kFeatureShape samples)
// as float32. Throws IoError when the path is not writable.
void SaveFeatures(const std::string& path, const SampleSource& source);

// Reads a whole file into memory. Throws FormatError on a bad magic,
// version mismatch, truncated or oversized payload, or a sample shape other
// than 384x8x8x8, and IoError when the file cannot be opened.
std::shared_ptr<const InMemorySource> LoadExternalFeatures(const std::string& path,
                                                           const std::string& prefix = "file");

// Validates the file and its per-sample headers, then reads samples on
// demand. Suitable for files larger than memory.
std::shared_ptr<const SampleSource> OpenFeatureFile(const std::string& path,
                                                    const std::string& prefix = "file");

// Samples [begin, begin + count) of `base`, re-indexed from 0.
std::shared_ptr<const SampleSource> Slice(std::shared_ptr<const SampleSource> base, int64_t begin,
                                          int64_t count, std::string prefix);

// One feature file per client holding its train, val and test samples in
// that order; the manifest records the file and the split sizes.
struct ManifestEntry {
  std::string name;
  std::string path;  // relative to the manifest directory unless absolute
  int64_t train = 0;
  int64_t val = 0;
  int64_t test = 0;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> clients;
  bool operator==(const Manifest&) const = default;
};

void WriteManifest(const std::string& path, const Manifest& manifest);
// Rejects unknown keys and negative sizes with ConfigError.
Manifest ReadManifest(const std::string& path);

// Opens every client file lazily and slices it into splits.
std::vector<ClientDataset> LoadManifestClients(const std::string& manifest_path);

}  // namespace fedtune::data

#endif  // FEDTUNE_DATA_FEATURE_FILE_H_
