// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace pedtutor {

/// Runs fn(0..n-1) on at most `workers` threads (the caller's thread when
/// workers <= 1). All indices run even if some throw; afterwards the
/// exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace pedtutor
