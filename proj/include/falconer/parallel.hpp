#pragma once

#include <cstddef>
#include <functional>

namespace falconer {

/// Worker count: FALCONER_LAB_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs body(i) for i in [0, n). Iterations must write disjoint state.
/// Nested calls from inside a worker run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace falconer
