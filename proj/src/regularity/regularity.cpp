#include "mehler/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "mehler/support/errors.hpp"
#include "mehler/support/parallel.hpp"

namespace mehler {

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Δ^d_{step} f(x) and its propagated error.
Estimate difference(const Field& f, const Vector& x, const Vector& step, int order) {
    double value = 0.0, error = 0.0;
    for (int j = 0; j <= order; ++j) {
        const double c = binomial(order, j) * (((order - j) % 2 == 0) ? 1.0 : -1.0);
        const Estimate e = f(x + static_cast<double>(j) * step);
        value += c * e.value;
        error += std::abs(c) * e.error;
    }
    return {value, error};
}

void check_probes(const ProbeSet& probes) {
    require(!probes.points.empty() && !probes.directions.empty(), "probe set needs points and directions");
}

// Smallest distance from p to another probe point (or 1 when alone).
double neighbour_distance(const ProbeSet& probes, const Vector& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : probes.points) {
        const double d = (q - p).norm();
        if (d > 0.0) best = std::min(best, d);
    }
    return std::isfinite(best) ? best : 1.0;
}

SeminormEstimate seminorm(const Field& f, const HNormRule& rule, const ProbeSet& probes,
                          std::span<const double> scales, int order, double exponent) {
    check_probes(probes);
    require(!scales.empty(), "at least one scale is needed");
    SeminormEstimate best;
    best.exponent = exponent;
    best.x = probes.points.front();
    best.h = probes.directions.front();
    struct Local {
        double value = 0.0;
        std::size_t point = 0, dir = 0;
        double scale = 0.0;
    };
    const auto found = parallel_map(probes.points.size(), [&](std::size_t i) {
        Local l;
        l.point = i;
        for (std::size_t k = 0; k < probes.directions.size(); ++k) {
            const Vector& h = probes.directions[k];
            const double hn = rule.norm(h);
            for (double r : scales) {
                const double v = std::abs(difference(f, probes.points[i], r * h, order).value) / std::pow(r * hn, exponent);
                if (v > l.value) l = {v, i, k, r};
            }
        }
        return l;
    });
    for (const auto& l : found) {
        if (l.value > best.value) {
            best.value = l.value;
            best.x = probes.points[l.point];
            best.h = probes.directions[l.dir];
            best.scale = l.scale;
        }
    }
    best.evaluations = probes.points.size() * probes.directions.size() * scales.size() * static_cast<std::size_t>(order + 1);
    return best;
}

}  // namespace

Field field_of(const TestFunction& f) {
    return [f](const Vector& x) {
        const double v = f.value(x);
        const double scale = f.bounded() ? std::max(std::abs(v), f.bound()) : std::abs(v);
        return Estimate{v, 8.0 * eps * scale};
    };
}

ProbeSet ProbeSet::lattice(int dim, double lo, double hi, std::size_t per_axis, std::size_t extra,
                           std::vector<Vector> directions) {
    require(dim >= 1 && dim <= 3, "lattice probes support dimensions 1 to 3");
    require(hi > lo, "lattice needs lo < hi");
    ProbeSet p;
    p.directions = std::move(directions);
    if (per_axis > 0) {
        std::size_t total = 1;
        for (int d = 0; d < dim; ++d) total *= per_axis;
        for (std::size_t i = 0; i < total; ++i) {
            Vector x(dim);
            std::size_t rest = i;
            for (int d = 0; d < dim; ++d) {
                const std::size_t j = rest % per_axis;
                rest /= per_axis;
                x(d) = per_axis == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(j) / (per_axis - 1);
            }
            p.points.push_back(std::move(x));
        }
    }
    // Additive recurrence with the generalized golden ratio of the dimension.
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
    for (std::size_t i = 1; i <= extra; ++i) {
        Vector x(dim);
        for (int d = 0; d < dim; ++d) {
            const double a = std::pow(1.0 / phi, d + 1);
            const double u = std::fmod(0.5 + a * static_cast<double>(i), 1.0);
            x(d) = lo + (hi - lo) * u;
        }
        p.points.push_back(std::move(x));
    }
    return p;
}

std::vector<Vector> ProbeSet::directions_for(const HNormRule& rule, std::size_t random, std::uint64_t seed) {
    auto dirs = rule.unit_directions();
    const auto basis = dirs;
    RandomStream stream(seed, 31);
    for (std::size_t i = 0; i < random; ++i) {
        Vector h = Vector::Zero(rule.dim());
        for (const auto& b : basis) h += stream.normal() * b;
        dirs.push_back(h / rule.norm(h));
    }
    return dirs;
}

std::vector<double> dyadic_scales(int j_min, int j_max) {
    require(j_min <= j_max, "dyadic range must be non-empty");
    std::vector<double> out;
    for (int j = j_min; j <= j_max; ++j) out.push_back(std::ldexp(1.0, -j));
    return out;
}

SeminormEstimate holder_seminorm(const Field& f, double alpha, const HNormRule& rule, const ProbeSet& probes,
                                 std::span<const double> scales) {
    require(alpha > 0.0 && alpha < 1.0, "Hölder exponent must lie in (0, 1)");
    return seminorm(f, rule, probes, scales, 1, alpha);
}

SeminormEstimate zygmund_seminorm(const Field& f, const HNormRule& rule, const ProbeSet& probes,
                                  std::span<const double> scales) {
    return seminorm(f, rule, probes, scales, 2, 1.0);
}

std::vector<ScaleRow> difference_profile(const Field& f, const ProbeSet& probes, std::span<const double> scales,
                                         int order) {
    check_probes(probes);
    require(order >= 1 && order <= 3, "difference order must lie in [1, 3]");
    struct Pair {
        std::vector<double> sup, noise;
    };
    const auto per_point = parallel_map(probes.points.size(), [&](std::size_t i) {
        Pair p{std::vector<double>(scales.size(), 0.0), std::vector<double>(scales.size(), 0.0)};
        for (const auto& h : probes.directions) {
            for (std::size_t k = 0; k < scales.size(); ++k) {
                const Estimate d = difference(f, probes.points[i], scales[k] * h, order);
                p.sup[k] = std::max(p.sup[k], std::abs(d.value));
                p.noise[k] = std::max(p.noise[k], d.error);
            }
        }
        return p;
    });
    std::vector<ScaleRow> rows(scales.size());
    for (std::size_t k = 0; k < scales.size(); ++k) {
        rows[k].scale = scales[k];
        for (const auto& p : per_point) {
            rows[k].sup_difference = std::max(rows[k].sup_difference, p.sup[k]);
            rows[k].noise = std::max(rows[k].noise, p.noise[k]);
        }
        rows[k].ratio = rows[k].sup_difference / scales[k];
    }
    return rows;
}

ExponentFit regularity_exponent(const Field& f, const ProbeSet& probes, double window_min, double window_max,
                                int order, int levels_per_octave) {
    require(window_min >= 1e-6 && window_max <= 1.0, "window must lie inside [1e-6, 1]");
    require(window_max >= 100.0 * window_min, "window must span at least two decades");
    require(levels_per_octave >= 1, "levels per octave must be positive");
    std::vector<double> scales;
    const double step = std::pow(2.0, -1.0 / levels_per_octave);
    for (double r = window_max; r >= window_min * (1.0 - 1e-12); r *= step) scales.push_back(r);

    ExponentFit fit;
    fit.order = order;
    fit.window_min = window_min;
    fit.window_max = window_max;
    fit.rows = difference_profile(f, probes, scales, order);
    std::vector<double> xs, ys;
    for (auto& row : fit.rows) {
        row.used = row.sup_difference > 0.0 && row.sup_difference >= 10.0 * row.noise;
        if (row.used) {
            xs.push_back(row.scale);
            ys.push_back(row.sup_difference);
        }
    }
    if (xs.size() < 3) {
        fit.degenerate = true;
        fit.slope = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    const LineFit line = fit_loglog(xs, ys);
    fit.slope = line.slope;
    fit.residual = line.residual;
    fit.saturated = fit.slope >= order - 0.05;
    return fit;
}

double growth_per_decade(std::span<const ScaleRow> rows) {
    require(rows.size() >= 2, "growth needs at least two scales");
    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                              [](const auto& a, const auto& b) { return a.scale < b.scale; });
    const double decades = std::log10(hi->scale / lo->scale);
    return std::pow(lo->ratio / hi->ratio, 1.0 / decades) - 1.0;
}

double ratio_variation(std::span<const ScaleRow> rows) {
    require(!rows.empty(), "variation needs at least one scale");
    double lo = rows.front().ratio, hi = lo;
    for (const auto& r : rows) {
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

DecayFit derivative_decay_exponent(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                   int order, std::span<const double> times, const DecayOptions& options) {
    require(order == 1 || order == 2, "decay exponents are measured for n = 1 or 2");
    require(times.size() >= 3, "decay fits need at least three times");
    check_probes(options.probes);
    for (double t : times) require(t >= min_derivative_time && t <= 0.5, "decay times must lie in [1e-6, 0.5]");
    const auto& probes = options.probes;

    DecayFit out;
    for (double t : times) {
        const SemigroupEvaluator ev(family, drift, f, t, options.method, order);
        auto derivative = [&](const Vector& x, const Vector& h) {
            if (order == 1) return ev.derivative(x, h);
            const Vector dirs[2] = {h, h};
            return ev.derivative_n(x, dirs);
        };
        struct Best {
            double value = -1.0, error = 0.0;
            std::size_t point = 0, dir = 0;
        };
        const auto found = parallel_map(probes.points.size(), [&](std::size_t i) {
            Best b;
            b.point = i;
            for (std::size_t k = 0; k < probes.directions.size(); ++k) {
                const Estimate e = derivative(probes.points[i], probes.directions[k]);
                if (std::abs(e.value) > b.value) b = {std::abs(e.value), e.error, i, k};
            }
            return b;
        });
        Best best;
        for (const auto& b : found)
            if (b.value > best.value) best = b;
        if (options.refine) {
            const Vector x0 = probes.points[best.point];
            const Vector& h = probes.directions[best.dir];
            const double reach = neighbour_distance(probes, x0);
            for (const auto& d : probes.directions) {
                const Vector unit = d / d.norm();
                auto negative = [&](double u) { return -std::abs(derivative(x0 + u * unit, h).value); };
                const auto [u, v] = boost::math::tools::brent_find_minima(negative, -reach, reach, 40);
                if (-v > best.value) best.value = -v, best.error = derivative(x0 + u * unit, h).error;
            }
        }
        out.rows.push_back({t, best.value, best.error});
        if (best.error > 0.1 * best.value) out.noisy = true;
    }
    std::vector<double> ts, vs;
    for (const auto& r : out.rows) {
        ts.push_back(r.t);
        vs.push_back(r.sup_derivative);
        out.fit.rows.push_back({r.t, r.sup_derivative, r.sup_derivative / r.t, r.error, true});
    }
    const LineFit line = fit_loglog(ts, vs);
    out.fit.slope = line.slope;
    out.fit.residual = line.residual;
    out.fit.order = order;
    out.fit.window_min = *std::min_element(ts.begin(), ts.end());
    out.fit.window_max = *std::max_element(ts.begin(), ts.end());
    return out;
}

InterpolationCheck interpolation_bound_residual(const TestFunction& f, double alpha, const HNormRule& rule,
                                                const ProbeSet& probes, std::span<const double> scales) {
    InterpolationCheck c;
    c.holder = holder_seminorm(field_of(f), alpha, rule, probes, scales).value;
    double probe_sup = 0.0;
    for (const auto& x : probes.points) {
        c.derivative = std::max(c.derivative, rule.dual_norm(f.gradient(x)));
        probe_sup = std::max(probe_sup, std::abs(f.value(x)));
    }
    c.sup = f.bounded() ? f.bound() : probe_sup;
    c.bound = std::pow(2.0, 1.0 - alpha) * std::pow(c.derivative, alpha) * std::pow(c.sup, 1.0 - alpha);
    c.residual = c.bound - c.holder;
    return c;
}

}  // namespace mehler
