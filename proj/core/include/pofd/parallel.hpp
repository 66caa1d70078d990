#pragma once

#include <cstddef>
#include <functional>

namespace pofd {

/// Runs body(i) for i in [0, count) on up to `threads` workers.
/// Each index is visited exactly once; callers write results to per-index
/// slots so the outcome does not depend on the schedule.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

/// Resolves a user thread request (0 = hardware concurrency).
unsigned resolve_threads(unsigned requested);

}  // namespace pofd
