#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace polyterm {

/// Splits [0, count) into `threads` contiguous blocks and runs work(begin, end)
/// on each. The first exception thrown by any block is rethrown.
template <class F>
void run_blocks(std::size_t count, unsigned threads, F&& work) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || count <= 1) {
        work(std::size_t{0}, count);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t begin = count * t / threads, end = count * (t + 1) / threads;
        pool.emplace_back([&, t, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Pairwise summation with a fixed split order, so the result depends only on
/// the values and their order.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 64) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct Estimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error. Constant samples return the common value
/// with zero standard error exactly.
inline Estimate mean_and_error(std::span<const double> v) {
    Estimate e;
    e.n = v.size();
    if (v.empty()) return e;
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) {
        e.estimate = *lo;
        return e;
    }
    const double n = static_cast<double>(v.size());
    e.estimate = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - e.estimate) * (v[i] - e.estimate);
    e.std_error = v.size() > 1 ? std::sqrt(pairwise_sum(sq) / (n - 1.0) / n) : 0.0;
    return e;
}

} // namespace polyterm
