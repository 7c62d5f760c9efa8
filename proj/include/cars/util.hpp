#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cars {

// Shortest round-trip decimal form. Used by every CSV/JSON writer so the
// same value always prints the same bytes.
inline std::string fmt_float(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

// Runs fn(i) for i in [0, n). Work is split by index block, so results keyed
// by i are independent of scheduling. Falls back to a plain loop when the
// machine has a single core or n is small.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const size_t hw = std::thread::hardware_concurrency();
    if (hw <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t workers = std::min(hw, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace cars
