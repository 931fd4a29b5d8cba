#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace iperc {

inline int default_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Runs f(i) for i in [0, n). workers <= 1 is the serial reference path;
// results must be written to per-index slots so aggregation stays
// deterministic regardless of thread count.
template <class F>
void for_each_replica(long n, int workers, F&& f) {
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) f(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
#endif
    for (long i = 0; i < n; ++i) f(i);
}

}  // namespace iperc
