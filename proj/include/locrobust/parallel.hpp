#pragma once

#include <cstddef>
#include <functional>

namespace locrobust {

/// Runs body(i) for i in [0, n) on a work-stealing pool limited to `threads`
/// workers (0 = hardware default). Callers write results into slot i only,
/// which keeps outputs independent of scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace locrobust
