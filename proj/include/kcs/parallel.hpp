#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kcs {

namespace detail {
inline std::atomic<unsigned>& thread_count_storage() {
    static std::atomic<unsigned> count{1};
    return count;
}
}  // namespace detail

/// Number of worker threads used by parallel_for. Results never depend on it.
inline unsigned thread_count() { return detail::thread_count_storage().load(); }

inline void set_thread_count(unsigned n) { detail::thread_count_storage().store(std::max(1u, n)); }

/// RAII override of the worker count, restored on scope exit.
class ScopedThreadCount {
public:
    explicit ScopedThreadCount(unsigned n) : saved_(thread_count()) { set_thread_count(n); }
    ~ScopedThreadCount() { set_thread_count(saved_); }
    ScopedThreadCount(const ScopedThreadCount&) = delete;
    ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

private:
    unsigned saved_;
};

/// Calls body(begin, end) over a static partition of [0, n).
///
/// Every index is processed by exactly one call and each call must write only to
/// outputs owned by its indices, so the result is independent of the partition.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        if (n > 0) body(std::size_t{0}, n);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    auto run = [&](std::size_t begin, std::size_t end) {
        try {
            body(begin, end);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        if (begin < end) pool.emplace_back(run, begin, end);
    }
    run(0, std::min(n, chunk));
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace kcs
