#pragma once

#include <cstddef>
#include <functional>

namespace ckg {

// Upper bound on worker threads used by parallel_for. Defaults to 1.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Calls body(begin, end) over disjoint contiguous chunks of [0, n). Each
// index is visited exactly once; callers must only write state owned by
// the indices in their chunk, which keeps results independent of the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 16);

}  // namespace ckg
