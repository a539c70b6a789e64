#pragma once

#include <cstdint>
#include <functional>

namespace emmkgr {

/// Worker cap for row-parallel kernels. Defaults to EMMKGR_THREADS when set,
/// otherwise the hardware concurrency. Results never depend on this value.
int thread_count();
void set_thread_count(int threads);

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is
/// handled by exactly one call, so per-row work stays deterministic.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body,
                  std::int64_t min_chunk = 64);

}  // namespace emmkgr
