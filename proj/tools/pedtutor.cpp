// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "pedtutor/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pedtutor::command_dispatch(args, std::cout, std::cerr);
}
