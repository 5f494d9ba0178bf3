#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lfr {

namespace detail {
inline std::atomic<int>& thread_override() {
    static std::atomic<int> value{0};
    return value;
}
}  // namespace detail

/// Worker count used by parallel_for. Resolution order: set_thread_count(),
/// LFR_THREADS environment variable, hardware concurrency.
inline int thread_count() {
    if (int n = detail::thread_override().load(); n > 0) return n;
    if (const char* env = std::getenv("LFR_THREADS")) {
        if (int n = std::atoi(env); n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// 0 restores the default.
inline void set_thread_count(int n) { detail::thread_override().store(std::max(0, n)); }

/// Runs fn(i) for i in [0, n). Work items are claimed dynamically, so fn must
/// only write to storage owned by item i; results are then independent of the
/// worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
    if (n == 0) return;
    const auto workers = static_cast<std::size_t>(threads > 0 ? threads : thread_count());
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    const std::size_t spawn = std::min(workers, n) - 1;
    pool.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(body);
    body();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace lfr
