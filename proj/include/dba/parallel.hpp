#pragma once

// Scenario-parallel map. Every loop body must write only to its own index;
// reductions across scenarios are done afterwards by the caller in index
// order so results never depend on the worker count.

#include <cstddef>
#include <exception>
#include <vector>

namespace dba {

/// Worker count used by for_each_index. 1 selects the serial reference path.
int worker_count();
void set_worker_count(int n);
/// True when the library was compiled with OpenMP support.
bool parallel_enabled();

template <typename F>
void for_each_index_serial(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

template <typename F>
void for_each_index(std::size_t n, F&& body) {
#ifdef DBA_HAVE_OPENMP
  const int workers = worker_count();
  if (workers > 1 && n > 1) {
    // An exception may not escape an OpenMP region; keep the one with the
    // lowest index so the error reported matches the serial path.
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(static)
    for (long long i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return;
  }
#endif
  for_each_index_serial(n, body);
}

}  // namespace dba
