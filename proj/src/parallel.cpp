#include "dba/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>

#include <Eigen/Core>

namespace dba {

namespace {

int initial_workers() {
  if (const char* env = std::getenv("DBA_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return 1;
}

std::atomic<int>& workers() {
  static std::atomic<int> n{(Eigen::setNbThreads(1), initial_workers())};
  return n;
}

}  // namespace

int worker_count() { return workers().load(); }

void set_worker_count(int n) {
  // Parallelism lives in the scenario map only; Eigen kernels stay serial so
  // results never depend on the worker count.
  Eigen::setNbThreads(1);
  workers().store(std::max(1, n));
}

bool parallel_enabled() {
#ifdef DBA_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace dba
