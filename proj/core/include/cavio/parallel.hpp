#pragma once

#include <cstddef>
#include <functional>

namespace cavio {

// Number of workers to use: `requested` if > 0, else hardware concurrency.
unsigned resolve_threads(unsigned requested);

// Runs body(i) for i in [0, count) on up to `threads` workers using a fixed
// contiguous partition. Each index is processed exactly once, so results
// written to per-index slots are independent of the worker count. The
// exception from the lowest failing index is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace cavio
