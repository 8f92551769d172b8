#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace agamp {

// Static round-robin split of [0, count) over `workers` threads. Tasks write
// to disjoint slots, so results are identical for any worker count.
inline void parallel_for(std::int64_t count, int workers,
                         const std::function<void(std::int64_t)>& body) {
    workers = std::max(1, workers);
    if (workers == 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::int64_t i = w; i < count; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace agamp
