#pragma once

#include <cstddef>
#include <functional>

namespace hencky {

/// Worker count from HENCKY_WORKERS (default 1, clamped to [1, 64]).
int worker_count();

/// Calls fn(i) for i in [0, n) over static contiguous chunks.
/// Results must not depend on the chunking; reductions stay with the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t min_chunk = 4096);

}  // namespace hencky
