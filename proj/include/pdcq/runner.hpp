#pragma once

// Deterministic parallel evaluation: frames map to per-frame accumulators
// on a bounded worker pool, then reduce in frame order. The result is
// bit-identical for any thread count.

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "pdcq/core.hpp"
#include "pdcq/ingest.hpp"
#include "pdcq/metric.hpp"

namespace pdcq {

inline StatAccumulator evaluate_parallel(size_t count,
                                         const std::function<EvalFrame(size_t)>& load,
                                         const ClassTable& classes, const PdcqConfig& config,
                                         int threads) {
    if (threads < 1) throw ConfigError("thread count must be at least 1");

    std::vector<StatAccumulator> partial(count);
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                partial[i] = evaluate_frame(load(i), classes, config);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    if (threads == 1 || count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const size_t n = std::min(static_cast<size_t>(threads), count);
        pool.reserve(n);
        for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    StatAccumulator acc = StatAccumulator::make(config.lambdas, config.deltas, classes.fingerprint());
    for (size_t i = 0; i < count; ++i) acc = merge(std::move(acc), partial[i]);
    return acc;
}

inline StatAccumulator evaluate_tasks(const std::vector<EvalTask>& tasks, const ClassTable& classes,
                                      const PdcqConfig& config, int threads) {
    return evaluate_parallel(
        tasks.size(), [&](size_t i) { return load_eval_frame(tasks[i], classes); }, classes, config,
        threads);
}

}  // namespace pdcq
