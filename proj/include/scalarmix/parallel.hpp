#pragma once

#include <cstddef>
#include <functional>

namespace scalarmix {

/// Runs body(i) for i in [0, count) on at most `threads` worker threads.
/// Work items are claimed dynamically; results must be written to
/// per-item slots so the outcome does not depend on scheduling. The first
/// exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

/// Default worker count (hardware concurrency, at least 1).
int default_threads();

}  // namespace scalarmix
