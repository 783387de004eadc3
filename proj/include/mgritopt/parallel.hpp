#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace mgritopt {

/// Runs f(i) for i in [begin, end) on up to `threads` workers with a static
/// contiguous partition. Every index is handled by exactly one worker, so
/// callers that write only to slot i are race free and the result does not
/// depend on the worker count.
template <class F>
void parallel_for(Eigen::Index begin, Eigen::Index end, int threads, F&& f) {
    const Eigen::Index count = end - begin;
    if (count <= 0) return;
    if (threads < 2 || count < 2) {
        for (Eigen::Index i = begin; i < end; ++i) f(i);
        return;
    }
    const Eigen::Index workers = std::min<Eigen::Index>(threads, count);
    const Eigen::Index chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Eigen::Index t = 0; t < workers; ++t) {
        const Eigen::Index lo = begin + t * chunk;
        const Eigen::Index hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &f] {
            for (Eigen::Index i = lo; i < hi; ++i) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mgritopt
