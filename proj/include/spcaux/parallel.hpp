#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace spcaux {

/// Worker count used by the simulation fan-out.  SPC_AUX_THREADS overrides
/// the hardware default; results are invariant to the value because every
/// job index owns a fixed child stream and reductions are exact-integer.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("SPC_AUX_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0)
            return static_cast<std::size_t>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<std::size_t>(hw);
}

inline std::size_t effective_workers(std::uint64_t n, std::size_t workers) {
    if (workers == 0)
        workers = worker_count();
    if (n != 0 && workers > n)
        workers = static_cast<std::size_t>(n);
    return workers == 0 ? 1 : workers;
}

/// Run body(begin, end, worker) over a block partition of [0, n); worker is
/// the disjoint block index in [0, effective_workers(n, workers)).  Callers
/// must make each job index's result independent of the others, so outputs
/// do not depend on scheduling or on the worker count.
template <class Body>
void parallel_for_blocks(std::uint64_t n, Body&& body, std::size_t workers = 0) {
    if (n == 0)
        return;
    workers = effective_workers(n, workers);
    if (workers == 1) {
        body(std::uint64_t{0}, n, std::size_t{0});
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::uint64_t begin = n * w / workers;
        const std::uint64_t end = n * (w + 1) / workers;
        pool.emplace_back([&body, begin, end, w] { body(begin, end, w); });
    }
    for (auto& t : pool)
        t.join();
}

} // namespace spcaux
