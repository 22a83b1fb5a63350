// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "parktax/cli.hpp"

int main(int argc, char** argv) {
  return parktax::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
