#include "cvkit/common.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cvkit {

int worker_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void configure_threads_from_env() {
  const char* env = std::getenv("CVKIT_THREADS");
  if (env == nullptr) return;
  try {
    const int n = std::stoi(env);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
  } catch (const std::exception&) {
    // ignored: malformed value keeps the OpenMP default
  }
}

}  // namespace cvkit
