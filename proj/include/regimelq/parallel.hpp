#pragma once

// Thin OpenMP wrapper. Every parallel kernel in the library has a serial twin
// selected by Execution::serial; tests compare the two bit for bit.

#include <cstddef>
#include <cstdint>
#include <exception>

#include <omp.h>

namespace regimelq {

enum class Execution { serial, parallel };

/// Caps the OpenMP team size; 0 leaves the runtime default.
inline void configure_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

inline int max_threads() { return omp_get_max_threads(); }

/// Runs fn(k) for k in [0, n). Iterations must write disjoint memory. If any
/// iteration throws, the exception of the lowest failing index is rethrown so
/// the reported error does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Execution exec, Fn&& fn) {
  if (exec == Execution::serial || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::exception_ptr error;
  std::size_t error_index = n;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < count; ++k) {
    try {
      fn(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(regimelq_parallel_error)
      {
        if (static_cast<std::size_t>(k) < error_index) {
          error_index = static_cast<std::size_t>(k);
          error = std::current_exception();
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace regimelq
