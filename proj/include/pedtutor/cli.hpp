// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pedtutor {

/// Runs one subcommand: prepare-data, rollout, score, evaluate, analyze,
/// serve-mock. `args` excludes the program name. Returns the exit status.
int command_dispatch(const std::vector<std::string>& args, std::ostream& out,
                     std::ostream& err);

}  // namespace pedtutor
