#pragma once

#include <cstddef>
#include <functional>

namespace extsolve {

/// Worker count: EXT_SOLVER_THREADS when set and positive, otherwise the
/// hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is
/// handled by exactly one worker, so results written per index do not
/// depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace extsolve
