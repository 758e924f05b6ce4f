#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace encnav {

/// Order statistics summary. Quartiles use linear interpolation between
/// closest ranks (the common "type 7" rule).
struct SummaryStats {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    static SummaryStats of(std::vector<double> values) {
        if (values.empty()) throw std::invalid_argument("SummaryStats: empty sample");
        std::sort(values.begin(), values.end());
        auto quantile = [&](double q) {
            const double pos = q * double(values.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
            const double frac = pos - double(lo);
            return values[lo] * (1.0 - frac) + values[hi] * frac;
        };
        SummaryStats s;
        s.count = values.size();
        s.min = values.front();
        s.max = values.back();
        s.median = quantile(0.5);
        s.q1 = quantile(0.25);
        s.q3 = quantile(0.75);
        return s;
    }
};

inline double median_of(std::vector<double> values) { return SummaryStats::of(std::move(values)).median; }

/// Median wall time of fn() over `iters` runs after `warmup` discarded runs.
template <typename Fn>
double median_seconds(Fn&& fn, int iters, int warmup = 3) {
    for (int i = 0; i < warmup; ++i) fn();
    std::vector<double> times;
    times.reserve(iters);
    for (int i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return median_of(std::move(times));
}

}  // namespace encnav
