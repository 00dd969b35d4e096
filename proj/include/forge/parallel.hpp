#pragma once

#include <functional>

namespace forge {

// Hardware threads, capped by FORGE_THREADS when set.
int worker_count();

// Runs fn(i) for i in [0, n) on worker_count() threads in contiguous chunks.
// Callers write only to slot i, so results do not depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace forge
