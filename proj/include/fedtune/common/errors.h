// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_COMMON_ERRORS_H_
#define FEDTUNE_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedtune {

// Invalid shapes, configurations or preconditions. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// NaN/Inf produced during a forward or backward pass, or a diverging loss.
// Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed wire message or feature file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or unwritable paths. Maps to CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedtune

#endif  // FEDTUNE_COMMON_ERRORS_H_
