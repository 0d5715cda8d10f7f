// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace doakit {

/// Runs fn(i) for every i in [0, n) on up to `workers` threads, each taking
/// the next unclaimed index. The first exception thrown is rethrown after
/// all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace doakit
