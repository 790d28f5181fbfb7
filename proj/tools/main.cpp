// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv) {
  return cplopt::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
