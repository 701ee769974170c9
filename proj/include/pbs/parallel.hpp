#pragma once

#include <cstddef>
#include <functional>

namespace pbs {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be deposited by index; scheduling order is unspecified. If any call throws,
/// the exception from the smallest failing index is rethrown after all
/// workers finish.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace pbs
