#pragma once

#include <cstddef>
#include <functional>

namespace mildlab {

// Global worker count used by every ensemble loop. 0 means hardware concurrency.
void set_worker_count(unsigned workers);
unsigned worker_count();

// Runs body(i) for i in [0, n). Each index writes only its own slot, so results
// do not depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mildlab
