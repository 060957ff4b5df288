#pragma once

// Chunked execution used by every data-parallel kernel in the library.
//
// Work is cut into a fixed number of chunks that does not depend on the
// thread count. Exec::serial walks the chunks in order on the calling thread
// and is the reference path; Exec::parallel hands chunks to an OpenMP team.
// Results are written per chunk and merged by the caller in chunk order, so
// both paths produce bit-identical output.

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace drnd {

enum class Exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline std::size_t chunk_count(std::size_t items, std::size_t chunk_size) {
  return chunk_size == 0 ? 0 : (items + chunk_size - 1) / chunk_size;
}

// Calls body(chunk) for chunk in [0, n_chunks) and returns the results in
// chunk order. The first exception thrown by any chunk is rethrown.
template <typename R, typename Body>
std::vector<R> map_chunks(std::size_t n_chunks, Exec exec, Body&& body) {
  std::vector<R> results(n_chunks);
  if (exec == Exec::serial || n_chunks < 2) {
    for (std::size_t c = 0; c < n_chunks; ++c) results[c] = body(c);
    return results;
  }
  std::vector<std::exception_ptr> errors(n_chunks);
  const auto n = static_cast<long long>(n_chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long c = 0; c < n; ++c) {
    try {
      results[static_cast<std::size_t>(c)] = body(static_cast<std::size_t>(c));
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace drnd
