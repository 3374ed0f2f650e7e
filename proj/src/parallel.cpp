#include "adsim/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace adsim {

int worker_count() {
    if (const char* env = std::getenv("ADSIM_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_blocks(std::int64_t n, std::int64_t block_size,
                     const std::function<void(std::int64_t, std::int64_t,
                                              std::int64_t)>& fn) {
    if (n <= 0) return;
    if (block_size <= 0) block_size = kDefaultBlock;
    const std::int64_t n_blocks = (n + block_size - 1) / block_size;
    int workers = std::min<std::int64_t>(worker_count(), n_blocks);
    if (workers <= 1) {
        for (std::int64_t b = 0; b < n_blocks; ++b)
            fn(b, b * block_size, std::min(n, (b + 1) * block_size));
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto run = [&] {
        for (;;) {
            std::int64_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            fn(b, b * block_size, std::min(n, (b + 1) * block_size));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

} // namespace adsim
