// parallel.hpp: index-parallel loop over a fixed range

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace adiatherm {

inline int default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count). Each index writes only its own output slot, so
/// results do not depend on scheduling. The exception from the lowest failing index
/// is rethrown.
template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (count <= 0) return;
    threads = std::clamp(threads <= 0 ? default_threads() : threads, 1, count);
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace adiatherm
