#pragma once

#include <functional>

namespace li {

// Worker count: explicit request, else LI_THREADS, else 1.
int resolve_threads(int requested = 0);

// Runs fn(i) for i in [0, n) across up to n_threads workers. Work items must
// be independent; determinism comes from pre-assigned RNG streams, not
// scheduling.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

}  // namespace li
