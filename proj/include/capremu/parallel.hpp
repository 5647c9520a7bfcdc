#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace capremu {

/// Run body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunk boundaries depend only on (n, workers) and every index is
/// written by exactly one worker, so results never depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, int workers, Body &&body) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (w == 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(w);
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t) {
        const std::size_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, t, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto &th : pool) th.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace capremu
