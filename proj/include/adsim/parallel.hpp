#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace adsim {

// Worker count: ADSIM_WORKERS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int worker_count();

// Splits [0, n) into fixed-size blocks and runs fn(block_index, begin, end)
// for each. Blocks are claimed atomically, so callers that keep one partial
// result per block and reduce the partials in block index order get results
// independent of the worker count and of scheduling.
void parallel_blocks(std::int64_t n, std::int64_t block_size,
                     const std::function<void(std::int64_t, std::int64_t,
                                              std::int64_t)>& fn);

constexpr std::int64_t kDefaultBlock = 1024;

} // namespace adsim
