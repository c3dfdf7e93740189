#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "mehler/resolvent.hpp"
#include "mehler/support/errors.hpp"

using namespace mehler;
using Catch::Approx;

namespace {

Vector point(double a) { return Vector::Constant(1, a); }
Vector point(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Matrix rotating_q() {
    Matrix q(2, 2);
    q << 2.0, 0.5, 0.5, 1.0;
    return q;
}

Matrix rotating_b() {
    Matrix b(2, 2);
    b << 0.5, 0.1, -0.1, 0.5;
    return b;
}

}  // namespace

TEST_CASE("time rules integrate exponentials", "[resolvent]") {
    const double lambda = 1.5, cutoff = 20.0;
    const auto rule = laplace_time_rule(lambda, cutoff);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    CHECK(total == Approx(-std::expm1(-lambda * cutoff) / lambda).epsilon(1e-13));

    const auto graded = graded_time_rule(0.7);
    double moment = 0.0;
    for (std::size_t i = 0; i < graded.nodes.size(); ++i) moment += graded.weights[i] * graded.nodes[i];
    CHECK(moment == Approx(0.5 * 0.7 * 0.7).epsilon(1e-13));
}

TEST_CASE("resolvent of constants and cosines", "[resolvent]") {
    const auto heat = MeasureFamily::gaussian_heat(1);
    const auto c = functions::constant(1, 3.0);
    CHECK(resolvent({heat, heat.natural_drift(), c, 0.5}, point(0.2)).value == Approx(6.0).epsilon(1e-12));

    const auto cosine = functions::cosine(point(1.0));
    const auto u = resolvent({heat, heat.natural_drift(), cosine, 2.0}, point(0.0));
    CHECK(u.value == Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(u.error < 1e-8);

    for (double s : {0.3, 0.5, 0.8}) {
        const double k = 2.5, x = 0.3;
        const auto fam = MeasureFamily::fractional_heat(1, s);
        const auto r = resolvent({fam, fam.natural_drift(), functions::cosine(point(k)), 1.0}, point(x));
        const double expect = std::cos(k * x) / (1.0 + std::pow(k, 2 * s));
        CHECK(std::abs(r.value - expect) <= r.error);
        CHECK(r.value == Approx(expect).epsilon(1e-8));
    }
}

TEST_CASE("resolvent agrees with the multiplier oracle", "[resolvent]") {
    const auto f = functions::trig_polynomial(
        2, 0.5, {TrigTerm{1.0, point(1.0, -0.5), 0.3}, TrigTerm{-0.7, point(3.0, 2.0), 0.0}});
    const std::vector<MeasureFamily> families{MeasureFamily::gaussian_heat(2), MeasureFamily::fractional_heat(2, 0.35),
                                              MeasureFamily::gross_mixture(rotating_q(), 0.6)};
    for (const auto& fam : families) {
        const double lambda = 0.8;
        const ResolventEvaluator ev(fam, fam.natural_drift(), f, lambda);
        const auto oracle = multiplier_resolvent_oracle(translation_invariant_symbol(fam), lambda, f);
        for (const auto& x : {point(0.0, 0.0), point(0.4, -1.3), point(2.0, 0.7)}) {
            const auto u = ev.value(x);
            CHECK(std::abs(u.value - oracle(x)) <= 1e-8);
            CHECK(std::abs(u.value - oracle(x)) <= u.error + 1e-12);
        }
        const auto trig = ev.as_trigonometric();
        REQUIRE(trig.has_value());
        CHECK(std::abs(trig->u(point(0.4, -1.3)) - oracle(point(0.4, -1.3))) <= trig->error);
    }
}

TEST_CASE("multiplier oracles", "[resolvent]") {
    const auto f = functions::cosine(point(1.0), 2.0);
    const auto zero = [](const Vector&) { return 0.0; };
    CHECK(multiplier_resolvent_oracle(zero, 4.0, f)(point(0.3)) == Approx(f(point(0.3)) / 4.0));
    const auto frac = translation_invariant_symbol(MeasureFamily::fractional_heat(1, 0.5));
    CHECK(multiplier_resolvent_oracle(frac, 1.0, functions::cosine(point(1.0)))(point(0.2)) ==
          Approx(std::cos(0.2) / 2.0));
    const auto two = functions::trig_polynomial(1, 0.0, {TrigTerm{1.0, point(1.0), 0.0}, TrigTerm{0.5, point(2.0), 0.0}});
    const double sum = multiplier_resolvent_oracle(frac, 1.0, functions::cosine(point(1.0)))(point(0.7)) +
                       multiplier_resolvent_oracle(frac, 1.0, functions::cosine(point(2.0), 0.5))(point(0.7));
    CHECK(multiplier_resolvent_oracle(frac, 1.0, two)(point(0.7)) == Approx(sum).epsilon(1e-15));
    CHECK_THROWS_AS(translation_invariant_symbol(MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.5)),
                    InvalidArgument);
    CHECK_THROWS_AS(translation_invariant_symbol(MeasureFamily::classical_ou(rotating_q())), InvalidArgument);
}

TEST_CASE("resolvent sup bound and approximation of the identity", "[resolvent]") {
    const auto fam = MeasureFamily::fractional_heat(1, 0.5);
    const auto f = functions::smoothed_step(point(1.0), 0.2, 0.1);
    ResolventOptions coarse;
    coarse.inner = MethodSpec::quadrature(1e-7);
    for (double lambda : {0.5, 2.0}) {
        const ResolventEvaluator ev(fam, fam.natural_drift(), f, lambda, coarse);
        for (double x : {-2.0, 0.1}) {
            const auto u = ev.value(point(x));
            CHECK(std::abs(u.value) <= f.bound() / lambda + u.error);
        }
    }
    const Vector x = point(0.35);
    double previous = 1e300;
    for (double lambda : {10.0, 100.0, 1000.0}) {
        const ResolventEvaluator ev(fam, fam.natural_drift(), f, lambda, coarse);
        const double gap = std::abs(lambda * ev.value(x).value - f(x));
        CHECK(gap < previous);
        previous = gap;
    }
    CHECK(previous < 1e-2);
}

TEST_CASE("Monte Carlo resolvent agrees with quadrature", "[resolvent]") {
    const auto fam = MeasureFamily::fractional_heat(1, 0.6);
    const auto f = functions::smoothed_step(point(1.0), 0.3);
    const double lambda = 1.3;
    const auto quad = resolvent({fam, fam.natural_drift(), f, lambda}, point(0.25));
    const auto mc = resolvent_monte_carlo(fam, fam.natural_drift(), f, lambda, point(0.25), 40000, 8);
    CHECK(std::abs(mc.value - quad.value) <= 4 * mc.error);
}

TEST_CASE("mild solutions", "[resolvent]") {
    const auto fam = MeasureFamily::fractional_heat(1, 0.4);
    const auto drift = fam.natural_drift();
    const auto zero = functions::constant(1, 0.0);
    const auto f = functions::smoothed_step(point(1.0), 0.3);
    const double t = 0.6;

    const CauchyProblem homogeneous{fam, drift, 1.0, f, zero};
    const auto free = apply_semigroup(fam, drift, f, t, point(0.2));
    CHECK(mild_solution(homogeneous, t, point(0.2)).value == Approx(free.value).margin(1e-12));

    const CauchyProblem constant{fam, drift, 1.0, zero, functions::constant(1, 2.0)};
    CHECK(mild_solution(constant, t, point(0.9)).value == Approx(2.0 * t).epsilon(1e-12));

    const double k = 3.0;
    const auto cosine = functions::cosine(point(k));
    const CauchyProblem forced{fam, drift, 1.0, zero, cosine};
    const double m = std::pow(k, 0.8);
    for (double time : {0.05, 0.6, 1.0}) {
        const MildSolutionEvaluator ev(forced, time);
        for (double x : {0.0, 0.4}) {
            const auto v = ev.value(point(x));
            CHECK(v.value == Approx(-std::expm1(-time * m) / m * std::cos(k * x)).margin(1e-10));
            CHECK(std::abs(v.value) <= time * cosine.bound() + v.error);
        }
        const auto oracle = multiplier_mild_oracle(translation_invariant_symbol(fam), time, zero, cosine);
        CHECK(oracle(point(0.4)) == Approx(-std::expm1(-time * m) / m * std::cos(k * 0.4)).epsilon(1e-14));
    }

    // Time-dependent forcing g(r, x) = r·cos(kx): ∫₀^t r e^{-(t-r)m} dr.
    const CauchyProblem ramp{fam, drift, 1.0, zero, cosine, [](double r) { return r; }};
    const double expect = (t * m - 1.0 + std::exp(-t * m)) / (m * m);
    const auto v = mild_solution(ramp, t, point(0.0));
    CHECK(std::abs(v.value - expect) <= v.error);
    CHECK(v.value == Approx(expect).epsilon(1e-8));
    CHECK(mild_solution(ramp, 0.0, point(0.0)).value == 0.0);
    CHECK_THROWS_AS(mild_solution(ramp, 1.5, point(0.0)), InvalidArgument);
}

TEST_CASE("resolvent identity residuals", "[resolvent]") {
    {
        const auto fam = MeasureFamily::gaussian_heat(1);
        const auto r = resolvent_identity_residual(fam, fam.natural_drift(), functions::constant(1, 2.0), 0.5, 3.0,
                                                   point(0.1));
        CHECK(std::abs(r.value) < 1e-12);
    }
    {
        const auto fam = MeasureFamily::fractional_heat(1, 0.45);
        const auto f = functions::trig_polynomial(1, 0.0, {TrigTerm{1.0, point(1.0), 0.0}, TrigTerm{0.3, point(4.0), 1.0}});
        const auto r = resolvent_identity_residual(fam, fam.natural_drift(), f, 0.7, 2.0, point(0.3));
        CHECK(std::abs(r.value) <= 3 * r.error);
        CHECK(std::abs(r.value) < 1e-8);
    }
    {
        const auto fam = MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.7);
        const auto f = functions::cosine(point(1.0, 0.5));
        const auto r = resolvent_identity_residual(fam, fam.natural_drift(), f, 0.8, 2.0, point(0.2, -0.4), 4000, 3);
        CHECK(std::abs(r.value) <= 3 * r.error);
    }
}

TEST_CASE("resolvent rejects invalid problems", "[resolvent]") {
    const auto fam = MeasureFamily::gaussian_heat(1);
    CHECK_THROWS_AS(resolvent({fam, fam.natural_drift(), functions::cosine(point(1.0)), 0.0}, point(0.0)),
                    InvalidArgument);
    CHECK_THROWS_AS(resolvent({fam, fam.natural_drift(), functions::affine(point(1.0)), 1.0}, point(0.0)),
                    InvalidArgument);
    Matrix b(1, 1);
    b << -0.5;
    const auto growing = MeasureFamily::ou_fractional(Matrix::Identity(1, 1), b, 0.5);
    CHECK_THROWS_AS(resolvent({growing, growing.natural_drift(), functions::cosine(point(1.0)), 0.4}, point(0.0)),
                    InvalidArgument);
}
