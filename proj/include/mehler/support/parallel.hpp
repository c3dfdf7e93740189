#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mehler {

/// Process-wide worker count; 0 means hardware concurrency.
void set_worker_count(unsigned jobs);
unsigned worker_count();

namespace detail {
// Set inside worker threads so nested parallel_map calls run serially.
inline thread_local bool inside_worker = false;
}  // namespace detail

/// Evaluates fn(i) for i in [0, n) on up to worker_count() threads and returns
/// the results in index order. The first exception thrown by any task is
/// rethrown on the calling thread.
template <class Fn>
auto parallel_map(std::size_t n, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using T = decltype(fn(std::size_t{}));
    std::vector<T> out(n);
    const std::size_t workers = detail::inside_worker ? 1 : std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                detail::inside_worker = true;
                try {
                    for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace mehler
