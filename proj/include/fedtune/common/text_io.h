// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_COMMON_TEXT_IO_H_
#define FEDTUNE_COMMON_TEXT_IO_H_

#include <string>

namespace fedtune {

// Both throw IoError naming the path.
std::string ReadTextFile(const std::string& path);
// Creates missing parent directories.
void WriteTextFile(const std::string& path, const std::string& content);

}  // namespace fedtune

#endif  // FEDTUNE_COMMON_TEXT_IO_H_
