#ifndef PDCMODES_PARALLEL_HPP
#define PDCMODES_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pdcmodes {

/// Worker count used when a caller passes threads <= 0.
inline int default_threads() {
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically, so body must not depend on execution order. The first
/// exception thrown by any item is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    if (threads <= 0) threads = default_threads();
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace pdcmodes

#endif
