#pragma once

#include <cstddef>
#include <functional>

namespace pamk {

/// Worker cap: hardware concurrency, reduced by PA_MODELKIT_THREADS if set.
int max_threads();

/// Runs fn(0..n_tasks) across up to max_threads() workers. Tasks must write
/// to disjoint state; any ordered combination happens at the call site.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn);

} // namespace pamk
