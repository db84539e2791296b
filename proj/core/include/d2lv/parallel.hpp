#pragma once

#include <cstddef>
#include <functional>

namespace d2lv {

// Worker count resolution: explicit request > D2LV_JOBS env > hardware.
unsigned resolve_jobs(unsigned requested);

// Runs fn over [0, n) split into contiguous chunks, one chunk per worker.
// Chunk boundaries depend only on (n, jobs-resolved count is NOT part of the
// output contract): callers must write to disjoint, preallocated slots so the
// result is identical for any worker count. Exceptions propagate.
void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t begin, std::size_t end)>& fn);

} // namespace d2lv
