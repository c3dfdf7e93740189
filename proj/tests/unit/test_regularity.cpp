#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "mehler/regularity.hpp"
#include "mehler/resolvent.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/numeric.hpp"

using namespace mehler;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

Vector point(double a) { return Vector::Constant(1, a); }

std::vector<Vector> axis() { return {point(1.0)}; }

ProbeSet line_probes(std::size_t lattice, std::size_t extra, double lo = -pi, double hi = pi) {
    return ProbeSet::lattice(1, lo, hi, lattice, extra, axis());
}

}  // namespace

TEST_CASE("Hölder seminorm lower bounds", "[regularity]") {
    const auto rule = HNormRule::euclidean(1);
    const auto scales = linspace(0.05, 4.0, 80);
    CHECK(holder_seminorm(field_of(functions::constant(1, 2.0)), 0.5, rule, line_probes(33, 0), scales).value == 0.0);

    // sup_x |cos(x+h) - cos x| = 2 sin(h/2); the exact seminorm is max_h 2 sin(h/2)/√h.
    auto negative = [](double h) { return -2.0 * std::sin(0.5 * h) / std::sqrt(h); };
    const double exact = -boost::math::tools::brent_find_minima(negative, 0.5, 4.0, 50).second;
    CHECK(exact == Approx(1.2039).margin(1e-4));
    const auto est = holder_seminorm(field_of(functions::cosine(point(1.0))), 0.5, rule, line_probes(65, 64), scales);
    CHECK(est.value <= exact + 1e-12);
    CHECK(est.value >= 1.12);  // the x = 0 lower bound (1 - cos h)/√h peaks at about 1.122
    CHECK(est.value >= 0.99 * exact);
}

TEST_CASE("Hölder seminorm of Weierstrass functions", "[regularity]") {
    const auto rule = HNormRule::euclidean(1);
    const auto w = field_of(functions::weierstrass(point(1.0), 0.5, 17));
    const auto scales = dyadic_scales(2, 12);
    const double coarse = holder_seminorm(w, 0.5, rule, line_probes(65, 64), scales).value;
    const double fine = holder_seminorm(w, 0.5, rule, line_probes(129, 128), scales).value;
    CHECK(fine >= coarse);
    CHECK(fine < 1.1 * coarse);

    const auto fine_scales = dyadic_scales(2, 12);
    const auto coarse_scales = dyadic_scales(2, 6);
    const double a = holder_seminorm(w, 0.7, rule, line_probes(65, 64), coarse_scales).value;
    const double b = holder_seminorm(w, 0.7, rule, line_probes(65, 64), fine_scales).value;
    CHECK(b > 1.5 * a);
}

TEST_CASE("Zygmund seminorm", "[regularity]") {
    const auto rule = HNormRule::euclidean(1);
    const auto scales = dyadic_scales(2, 16);
    CHECK(zygmund_seminorm(field_of(functions::affine(point(2.0), 1.0)), rule, line_probes(17, 0), scales).value < 1e-9);
    const auto cos = zygmund_seminorm(field_of(functions::cosine(point(1.0))), rule, line_probes(33, 16), scales);
    CHECK(cos.value <= scales.front() + 1e-12);

    // u log|u| is Zygmund but not Lipschitz near 0.
    const auto xlogx = field_of(functions::mollified_xlogx(point(1.0), 1e-6));
    const auto near_zero = ProbeSet::lattice(1, -1e-3, 1e-3, 21, 0, axis());
    const auto rows2 = difference_profile(xlogx, near_zero, dyadic_scales(3, 14), 2);
    const auto rows1 = difference_profile(xlogx, near_zero, dyadic_scales(3, 14), 1);
    CHECK(ratio_variation(rows2) < 0.25);
    CHECK(growth_per_decade(rows1) > 0.2);
    CHECK(rows1.back().ratio > rows1.front().ratio + 0.9 * std::log(rows1.front().scale / rows1.back().scale));
}

TEST_CASE("probe monotonicity", "[regularity]") {
    const auto rule = HNormRule::euclidean(1);
    const auto w = field_of(functions::weierstrass(point(1.0), 0.4, 13));
    const auto scales = dyadic_scales(2, 10);
    auto small = line_probes(9, 0);
    auto large = small;
    for (const auto& p : line_probes(0, 40).points) large.points.push_back(p);
    CHECK(holder_seminorm(w, 0.3, rule, large, scales).value >= holder_seminorm(w, 0.3, rule, small, scales).value);
    CHECK(zygmund_seminorm(w, rule, large, scales).value >= zygmund_seminorm(w, rule, small, scales).value);
}

TEST_CASE("regularity exponents", "[regularity]") {
    const auto probes = line_probes(65, 64);
    const auto w = regularity_exponent(field_of(functions::weierstrass(point(1.0), 0.5, 17)), probes, 1.0 / 4096,
                                       0.25, 1);
    CHECK(w.slope == Approx(0.5).margin(0.05));
    CHECK_FALSE(w.saturated);

    const auto c1 = regularity_exponent(field_of(functions::cosine(point(1.0))), probes, 1e-5, 0.25, 1);
    CHECK(c1.slope == Approx(1.0).margin(0.02));
    CHECK(c1.saturated);
    const auto c2 = regularity_exponent(field_of(functions::cosine(point(1.0))), probes, 1e-3, 0.25, 2);
    CHECK(c2.slope == Approx(2.0).margin(0.02));
    CHECK(c2.saturated);

    // Closed-form resolvent of W_{0.3} with symbol |ξ|^{0.8}: exponent 0.3 + 0.8.
    const auto frac = MeasureFamily::fractional_heat(1, 0.4);
    const auto u = multiplier_resolvent_oracle(translation_invariant_symbol(frac), 1.0,
                                               functions::weierstrass(point(1.0), 0.3, 17));
    const auto fit = regularity_exponent(field_of(u), probes, 1.0 / 4096, 0.125, 2);
    CHECK(fit.slope == Approx(1.1).margin(0.07));

    CHECK_THROWS_AS(regularity_exponent(field_of(u), probes, 0.01, 0.2, 1), InvalidArgument);
    const auto flat = regularity_exponent(field_of(functions::constant(1, 1.0)), probes, 1e-4, 0.25, 1);
    CHECK(flat.degenerate);
}

TEST_CASE("derivative decay exponents", "[regularity]") {
    DecayOptions opt;
    opt.probes = ProbeSet::lattice(1, -1.0, 1.0, 21, 0, axis());
    const auto times = logspace(1e-3, 1e-1, 7);
    {
        const auto fam = MeasureFamily::fractional_heat(1, 0.5);
        const auto d = derivative_decay_exponent(fam, fam.natural_drift(), functions::smoothed_step(point(1.0), 1e-6),
                                                 1, times, opt);
        CHECK(d.fit.slope == Approx(-1.0).margin(0.05));
        CHECK_FALSE(d.noisy);
    }
    {
        const auto fam = MeasureFamily::gaussian_heat(1);
        const auto d = derivative_decay_exponent(fam, fam.natural_drift(), functions::smoothed_step(point(1.0), 1e-6),
                                                 2, times, opt);
        CHECK(d.fit.slope == Approx(-1.0).margin(0.07));
    }
    {
        const auto fam = MeasureFamily::fractional_heat(1, 0.5);
        DecayOptions wopt;
        wopt.probes = line_probes(129, 0);
        const auto d = derivative_decay_exponent(fam, fam.natural_drift(), functions::weierstrass(point(1.0), 0.5, 17),
                                                 1, times, wopt);
        CHECK(d.fit.slope == Approx(-0.5).margin(0.07));
    }
}

TEST_CASE("interpolation inequality", "[regularity]") {
    const auto rule = HNormRule::euclidean(1);
    const auto probes = line_probes(65, 64);
    const auto scales = linspace(0.02, 4.0, 120);
    const auto c = interpolation_bound_residual(functions::constant(1, 1.5), 0.5, rule, probes, scales);
    CHECK(c.holder == 0.0);
    CHECK(c.residual >= 0.0);
    const auto cos = interpolation_bound_residual(functions::cosine(point(1.0)), 0.5, rule, probes, scales);
    CHECK(cos.holder == Approx(1.2).margin(0.01));
    CHECK(cos.bound == Approx(std::sqrt(2.0)).margin(1e-3));
    CHECK(cos.residual >= 0.0);
    const auto sin3 = interpolation_bound_residual(functions::cosine(point(3.0), 1.0 / 3.0, -0.5 * pi), 0.3, rule,
                                                   probes, scales);
    CHECK(sin3.residual > 0.0);
}
