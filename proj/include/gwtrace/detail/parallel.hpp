#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gwtrace::detail {

// Runs fn(i) for every i in [0, n) across `workers` threads (0 or negative
// means hardware concurrency).  Indices are handed out by an atomic
// counter, so which thread runs which index is arbitrary; callers must
// write results into per-index slots and seed per-index RNG streams so the
// outcome is independent of the schedule.  The first exception thrown by
// any index is rethrown after all threads join.
inline void parallel_for_indices(std::uint64_t n, int workers,
                                 const std::function<void(std::uint64_t)>& fn) {
    if (n == 0) return;
    unsigned int w = workers > 0 ? static_cast<unsigned int>(workers)
                                 : std::thread::hardware_concurrency();
    if (w == 0) w = 1;
    if (static_cast<std::uint64_t>(w) > n) w = static_cast<unsigned int>(n);

    if (w == 1) {
        for (std::uint64_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto body = [&] {
        for (;;) {
            const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(w);
    for (unsigned int t = 0; t < w; ++t) threads.emplace_back(body);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gwtrace::detail
