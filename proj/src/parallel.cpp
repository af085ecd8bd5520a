#include "srmtl/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>

namespace srmtl {

int max_workers() {
  if (const char* env = std::getenv("SRMTL_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1, omp_get_max_threads());
}

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn,
                  int threads) {
  if (n <= 0) return;
  if (threads == 0) threads = max_workers();

  if (threads == 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }

  // OpenMP cancels no iterations on error, so capture the first exception
  // and rethrow once the loop has drained.
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace srmtl
