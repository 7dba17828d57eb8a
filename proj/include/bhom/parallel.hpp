#pragma once

#include <cstddef>
#include <functional>

namespace bhom {

/// Worker count for a requested degree; 0 means hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
/// independent and write to their own slots, so results do not depend on
/// the degree. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace bhom
