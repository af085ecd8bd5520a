#pragma once

#include <cstddef>
#include <functional>

namespace srmtl {

// Worker cap: SRMTL_THREADS if set (clamped to >= 1), else the OpenMP
// default for this machine.
int max_workers();

// Runs fn(i) for i in [0, n). threads == 0 means max_workers(); threads == 1
// runs the plain serial loop. Iterations must be independent; results should
// go into preallocated slots so the outcome does not depend on scheduling.
// The first exception raised by any iteration is rethrown after the loop.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn,
                  int threads = 0);

}  // namespace srmtl
