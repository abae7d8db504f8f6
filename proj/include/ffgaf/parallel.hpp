#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ffgaf {

// Worker count for data-parallel loops. Controlled by FFGAF_THREADS; the
// default is 1 so results never depend on the machine unless asked to.
inline int worker_count() {
    static const int n = [] {
        const char* env = std::getenv("FFGAF_THREADS");
        if (!env) return 1;
        int v = std::atoi(env);
        if (v < 1) v = 1;
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw > 0 && v > hw) v = hw;
        return v;
    }();
    return n;
}

// Runs body(i) for i in [0, n). Work is split into contiguous static chunks,
// one per worker, so writes to disjoint per-index slices stay race-free and
// every index is visited exactly once.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = worker_count();
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t p = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(p - 1);
    auto run_chunk = [&](std::size_t w) {
        const std::size_t begin = n * w / p;
        const std::size_t end = n * (w + 1) / p;
        for (std::size_t i = begin; i < end; ++i) body(i);
    };
    for (std::size_t w = 1; w < p; ++w) threads.emplace_back(run_chunk, w);
    run_chunk(0);
    for (auto& t : threads) t.join();
}

} // namespace ffgaf
