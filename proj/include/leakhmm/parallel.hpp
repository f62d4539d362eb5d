#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace leakhmm::util {

// Worker count: explicit argument wins, then LEAKHMM_WORKERS, then hardware.
inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("LEAKHMM_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs body(i) for i in [0, n).  Each index is claimed exactly once via an
// atomic cursor, so bodies must write only to their own slots; with that
// discipline results are independent of scheduling and worker count.
template <typename Body>
void parallel_for(long n, int workers, Body&& body) {
    workers = resolve_workers(workers);
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> cursor{0};
    const long chunk = std::max<long>(1, n / (workers * 8));
    auto run = [&] {
        for (;;) {
            const long lo = cursor.fetch_add(chunk);
            if (lo >= n) return;
            const long hi = std::min(n, lo + chunk);
            for (long i = lo; i < hi; ++i) body(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

// Pairwise-tree sum over slots [lo, hi).  The reduction topology depends only
// on the index range, which keeps parallel accumulations deterministic and
// loses less precision than a running sum.
template <typename T, typename Fetch, typename Combine>
T pairwise_reduce(long lo, long hi, Fetch&& fetch, Combine&& combine) {
    if (hi - lo == 1) return fetch(lo);
    if (hi - lo <= 16) {
        T acc = fetch(lo);
        for (long i = lo + 1; i < hi; ++i) acc = combine(std::move(acc), fetch(i));
        return acc;
    }
    const long mid = lo + (hi - lo) / 2;
    T left = pairwise_reduce<T>(lo, mid, fetch, combine);
    T right = pairwise_reduce<T>(mid, hi, fetch, combine);
    return combine(std::move(left), std::move(right));
}

} // namespace leakhmm::util
