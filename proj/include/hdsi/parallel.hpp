#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace hdsi {

// Worker count for embarrassingly parallel loops. HDS_IMPUTE_THREADS wins
// over the hardware count; anything unparseable or < 1 falls back to 1.
inline unsigned worker_count() {
    if (const char* env = std::getenv("HDS_IMPUTE_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) return static_cast<unsigned>(n);
        } catch (...) {
        }
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(begin, end) over disjoint chunks of [0, n). Falls back to a plain
// call on the caller's thread when one worker suffices.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = worker_count();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(workers, n);
    const std::size_t base = n / chunks;
    const std::size_t extra = n % chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    std::size_t begin = 0;
    for (std::size_t i = 0; i < chunks; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        const std::size_t end = begin + len;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    for (auto& th : pool) th.join();
}

}  // namespace hdsi
