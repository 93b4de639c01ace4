#pragma once

#include <cstddef>
#include <cstdint>

#include <omp.h>

namespace vdwalk {

/// Caps worker threads for all subsequent parallel sections (0 = runtime default).
inline void set_thread_count(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

inline int thread_count() { return omp_get_max_threads(); }

/// Runs body(i) for i in [0, n). Bodies must write only to slot i of their
/// outputs; callers reduce afterwards in index order, which keeps results
/// independent of the thread count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, int grain = 64) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, grain)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace vdwalk
