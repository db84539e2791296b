#include "d2lv/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace d2lv {

unsigned resolve_jobs(unsigned requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("D2LV_JOBS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    unsigned workers = resolve_jobs(jobs);
    if (workers > n) {
        workers = static_cast<unsigned>(n);
    }
    if (workers <= 1) {
        fn(0, n);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t begin = n * w / workers;
        std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace d2lv
