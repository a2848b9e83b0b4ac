#pragma once

#include <cstdint>
#include <functional>

namespace steincc {

// Runs fn(i) for i in [0, n).  Tasks must write to disjoint slots; the
// caller performs any final reduction in a fixed order, so results are
// identical for every thread count.  n_threads <= 1 runs inline.
void parallel_for(std::int64_t n, int n_threads,
                  const std::function<void(std::int64_t)>& fn);

// Sensible default for --threads: hardware concurrency, at least 1.
int default_thread_count();

}  // namespace steincc
