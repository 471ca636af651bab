#ifndef WDN_PARALLEL_HPP
#define WDN_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wdn {

/**
 * Number of worker threads to use.
 * Honors the `WDN_THREADS` environment variable when set to a positive integer,
 * otherwise falls back to the hardware concurrency.
 */
inline int default_threads() {
    if (const char* env = std::getenv("WDN_THREADS")) {
        try {
            int value = std::stoi(env);
            if (value > 0) {
                return value;
            }
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Run `fun(i)` for every `i` in `[0, n)` on up to `threads` workers.
 * Each index is processed exactly once; callers write results into
 * per-index slots so the outcome does not depend on scheduling.
 * The first exception thrown by any worker is rethrown on the caller.
 */
template<class Function_>
void parallel_for(std::size_t n, int threads, Function_ fun) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fun(i);
        }
        return;
    }

    std::atomic<std::size_t> next(0);
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fun(i);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };

    const auto nworkers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (std::size_t w = 0; w < nworkers; ++w) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}

#endif
