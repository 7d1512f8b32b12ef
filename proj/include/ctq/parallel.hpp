#ifndef CTQ_PARALLEL_HPP
#define CTQ_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ctq {

/// Run fn(i, worker) for i in [0, count), worker in [0, worker_count(...)).
/// Work items must be independent and write only to their own output slot;
/// results are then identical for any thread count. threads <= 1 runs inline
/// with worker = 0.
template <typename Fn>
void parallel_for_workers(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i, std::size_t{0});
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) fn(i, w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline std::size_t worker_count(std::size_t count, int threads) {
    if (threads <= 1 || count < 2) return 1;
    return std::min<std::size_t>(static_cast<std::size_t>(threads), count);
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    parallel_for_workers(count, threads, [&fn](std::size_t i, std::size_t) { fn(i); });
}

}  // namespace ctq

#endif  // CTQ_PARALLEL_HPP
