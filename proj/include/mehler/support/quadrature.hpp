#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mehler/support/errors.hpp"

namespace mehler::quad {

struct Options {
    double abs_tol = 0.0;
    double rel_tol = 1e-10;
    /// Tolerance relative to the integral of |f|; useful when the integral cancels.
    double l1_tol = 0.0;
    std::size_t max_intervals = 4000;
    bool throw_on_failure = true;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    std::size_t intervals = 0;
    bool converged = true;
};

namespace detail {

struct Panel {
    double a, b, value, error, l1;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk21(F& f, double a, double b) {
    using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const auto& xk = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<double, 21> fv{};
    fv[0] = f(mid);
    for (std::size_t i = 1; i < xk.size(); ++i) {
        fv[2 * i - 1] = f(mid + half * xk[i]);
        fv[2 * i] = f(mid - half * xk[i]);
    }
    // Index 0 is the centre (Kronrod only); odd abscissa indices carry the Gauss nodes.
    double k = wk[0] * fv[0];
    double l1 = wk[0] * std::abs(fv[0]);
    double g = 0.0;
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double pair = fv[2 * i - 1] + fv[2 * i];
        k += wk[i] * pair;
        l1 += wk[i] * (std::abs(fv[2 * i - 1]) + std::abs(fv[2 * i]));
        if (i % 2 == 1) g += wg[i / 2] * pair;
    }
    const double mean = 0.5 * k;
    double asc = wk[0] * std::abs(fv[0] - mean);
    for (std::size_t i = 1; i < xk.size(); ++i)
        asc += wk[i] * (std::abs(fv[2 * i - 1] - mean) + std::abs(fv[2 * i] - mean));
    const double w = std::abs(half);
    asc *= w;
    double err = std::abs((k - g) * half);
    if (asc > 0.0 && err > 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    err = std::max(err, 50.0 * std::numeric_limits<double>::epsilon() * l1 * w);
    return {a, b, k * half, err, l1 * w};
}

}  // namespace detail

/// Global adaptive Gauss-Kronrod (21/10) over [a, b] with interior breakpoints.
template <class F>
Result integrate(F&& f, std::span<const double> points, const Options& opt = {}) {
    std::priority_queue<detail::Panel> heap;
    double val = 0, err = 0, l1 = 0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(points[i + 1] > points[i])) continue;
        auto p = detail::gk21(f, points[i], points[i + 1]);
        val += p.value;
        err += p.error;
        l1 += p.l1;
        heap.push(p);
    }
    auto target = [&]() { return std::max({opt.abs_tol, opt.rel_tol * std::abs(val), opt.l1_tol * l1}); };
    while (!heap.empty() && err > target() && heap.size() < opt.max_intervals) {
        detail::Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;
        heap.pop();
        detail::Panel left = detail::gk21(f, worst.a, mid);
        detail::Panel right = detail::gk21(f, mid, worst.b);
        val += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum in spatial order so the result does not depend on refinement history.
    std::vector<detail::Panel> panels;
    panels.reserve(heap.size());
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    Result r;
    for (const auto& p : panels) {
        r.value += p.value;
        r.error += p.error;
        r.l1 += p.l1;
    }
    r.intervals = panels.size();
    r.converged = r.error <= std::max({opt.abs_tol, opt.rel_tol * std::abs(r.value), opt.l1_tol * r.l1}) * 1.000001;
    if (!r.converged && opt.throw_on_failure) {
        throw NumericalFailure("adaptive quadrature did not converge: value " + std::to_string(r.value) +
                               ", error estimate " + std::to_string(r.error));
    }
    return r;
}

template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
    const double pts[2] = {a, b};
    return integrate(std::forward<F>(f), std::span<const double>(pts, 2), opt);
}

/// Nodes and weights of an n-point Gauss rule on [-1, 1] (Golub-Welsch).
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

Rule gauss_legendre(std::size_t n);
/// Probabilists' Gauss-Hermite rule: integrates against the standard normal density.
Rule gauss_hermite(std::size_t n);

}  // namespace mehler::quad
