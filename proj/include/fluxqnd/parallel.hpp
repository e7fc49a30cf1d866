#pragma once

#include <cstddef>
#include <functional>

namespace fluxqnd {

/// requested > 0 wins; otherwise FLUXQND_WORKERS if set and positive;
/// otherwise the hardware concurrency (at least 1).
int resolve_workers(int requested = 0);

/// Calls body(i) for i in [0, n) on up to `workers` threads. Indices are
/// handed out dynamically, so body must not depend on execution order. The
/// first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace fluxqnd
