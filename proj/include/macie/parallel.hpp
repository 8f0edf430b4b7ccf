#pragma once

#include <cstddef>
#include <functional>

namespace macie {

// Worker count: `requested` when positive, else MACIE_THREADS when set and positive,
// else the hardware concurrency (at least 1).
std::size_t resolve_threads(std::size_t requested = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Tasks must write only to
// their own slots, which makes results independent of scheduling. The first
// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace macie
