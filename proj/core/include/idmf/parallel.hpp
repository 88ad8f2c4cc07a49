// SPDX-License-Identifier: Apache-2.0
/**
 * @file   parallel.hpp
 * @brief  Index-parallel loop capped by the IDMF_THREADS environment
 *         variable. Each index must write only its own output slot so that
 *         results do not depend on the thread count.
 */
#pragma once

#include <cstddef>
#include <functional>

namespace idmf {

/// Worker count: IDMF_THREADS if set and positive, else hardware threads.
std::size_t thread_count();

/// Overrides the worker count for the current process (0 restores the
/// environment/hardware default).
void set_thread_count(std::size_t n);

void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace idmf
