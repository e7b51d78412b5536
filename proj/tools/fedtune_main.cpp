// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "fedtune/cli/commands.h"

int main(int argc, char** argv) { return fedtune::cli::RunCli(argc, argv, std::cout, std::cerr); }
