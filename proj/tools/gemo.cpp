// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "gemo/cli/cli.hpp"

int main(int argc, char** argv) { return gemo::cli::run(argc, argv, std::cout, std::cerr); }
