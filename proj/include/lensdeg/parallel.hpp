#pragma once

#include <cstddef>
#include <functional>

namespace lensdeg {

/// Worker count used by the data-parallel loops (default: hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls fn(i) for every i in [0, n). Each index must write only its own output slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lensdeg
