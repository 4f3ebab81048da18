#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ikc {

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
// Callers must make fn(i) independent of execution order (own RNG stream,
// own output slot), so results are deterministic regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const std::size_t n_threads = std::min<std::size_t>(hw, n);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += n_threads) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace ikc
