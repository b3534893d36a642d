#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace noma {

/// Number of worker threads to use. Defaults to hardware concurrency,
/// overridable (CLI --threads). 0 is treated as 1.
std::size_t& worker_threads();

/// Runs fn(i) for i in [0, n). Work is split into contiguous index chunks so
/// results written by index are identical regardless of thread count.
/// Callers must make fn(i) independent of fn(j) and reduce afterwards in
/// fixed index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace noma
