#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace hyla {

// Runs fn(chunk, begin, end) over `threads` contiguous chunks of [0, n).
// Chunk boundaries depend only on (n, threads), so any reduction done in chunk
// order is reproducible for a fixed thread count. threads <= 1 runs inline.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    const std::size_t step = (n + threads - 1) / threads;
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) {
        const std::size_t b = std::min(n, t * step);
        const std::size_t e = std::min(n, b + step);
        pool.emplace_back([&fn, t, b, e] { fn(t, b, e); });
    }
    fn(std::size_t{0}, std::size_t{0}, std::min(n, step));
}

inline std::size_t hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

} // namespace hyla
