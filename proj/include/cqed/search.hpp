#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "cqed/errors.hpp"

namespace cqed::search {

struct ScalarOptimum {
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Golden-section minimisation of a unimodal function on [lo, hi]. Stops when
/// the bracket is narrower than `tol` (absolute, on the abscissa).
template <class F>
ScalarOptimum golden_minimize(F&& f, double lo, double hi, double tol = 1e-9, int max_iter = 500) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw DomainError("golden_minimize: invalid bracket");
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    int it = 0;
    while (b - a > tol && it < max_iter) {
        if (!std::isfinite(fc) || !std::isfinite(fd))
            throw NumericError("golden_minimize: objective not finite near x=" + std::to_string(c) +
                               " (bracket [" + std::to_string(a) + ", " + std::to_string(b) + "])");
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++it;
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    if (!std::isfinite(fx))
        throw NumericError("golden_minimize: objective not finite at optimum x=" + std::to_string(x));
    ScalarOptimum best{x, fx, it};
    if (fc < best.value) best = {c, fc, it};
    if (fd < best.value) best = {d, fd, it};
    return best;
}

/// Global-ish minimisation: evaluate on a uniform grid of `n` points, then
/// refine the best grid cell with golden-section search. Deterministic.
template <class F>
ScalarOptimum grid_golden_minimize(F&& f, double lo, double hi, std::size_t n, double tol = 1e-9) {
    if (n < 3) n = 3;
    const double step = (hi - lo) / static_cast<double>(n - 1);
    std::size_t best = 0;
    double best_val = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = f(lo + step * static_cast<double>(i));
        if (!std::isfinite(v)) throw NumericError("grid_golden_minimize: objective not finite on grid");
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    const double a = lo + step * static_cast<double>(best == 0 ? 0 : best - 1);
    const double b = lo + step * static_cast<double>(best + 1 >= n ? n - 1 : best + 1);
    auto refined = golden_minimize(f, a, b, tol);
    if (refined.value > best_val) refined = {lo + step * static_cast<double>(best), best_val, refined.iterations};
    return refined;
}

template <class F>
ScalarOptimum grid_golden_maximize(F&& f, double lo, double hi, std::size_t n, double tol = 1e-9) {
    auto r = grid_golden_minimize([&](double x) { return -f(x); }, lo, hi, n, tol);
    r.value = -r.value;
    return r;
}

}  // namespace cqed::search
