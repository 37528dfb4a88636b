#ifndef NMFRANK_PARALLEL_HPP
#define NMFRANK_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace nmfrank::parallel {

// Global cap on worker threads; 0 means hardware concurrency. The CLI sets
// this from --threads. Results never depend on the value: every loop body is
// a pure function of its index and results are stored by index.
void set_max_threads(int n);
int max_threads();

// Runs body(0..n-1). Nested calls execute serially on the caller thread, so
// outer loops own the parallelism. If any body throws, the exception for the
// lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nmfrank::parallel

#endif  // NMFRANK_PARALLEL_HPP
