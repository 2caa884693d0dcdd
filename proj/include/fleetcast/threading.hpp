#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fleetcast {

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(begin, end, worker) over contiguous index blocks. Blocks are
/// assigned by worker index, never work-stealing, so a fixed thread count
/// always maps the same items to the same worker. Callers that reduce
/// per-worker buffers in worker order therefore get bit-identical results
/// run-to-run for a fixed thread count.
inline void parallel_for(std::size_t n, int num_threads,
                         const std::function<void(std::size_t, std::size_t, int)>& fn) {
    if (n == 0) return;
    if (num_threads < 1) num_threads = 1;
    const auto workers = static_cast<std::size_t>(num_threads) < n
                             ? static_cast<std::size_t>(num_threads)
                             : n;
    if (workers == 1) {
        fn(0, n, 0);
        return;
    }
    const std::size_t base = n / workers;
    const std::size_t extra = n % workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t len = base + (w < extra ? 1 : 0);
        const std::size_t end = begin + len;
        pool.emplace_back([&fn, begin, end, w] { fn(begin, end, static_cast<int>(w)); });
        begin = end;
    }
    for (auto& t : pool) t.join();
}

}  // namespace fleetcast
