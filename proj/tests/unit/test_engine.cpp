#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mehler/engine.hpp"
#include "mehler/kernels.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/quadrature.hpp"

using namespace mehler;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

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

// Convolution with the Cauchy density of scale t (the s = 1/2 heat law in one dimension).
double cauchy_smoothing(double (*f)(double), double t, double x) {
    auto integrand = [&](double u) {
        // y = t tan(u) maps the Cauchy law to the uniform law on (-π/2, π/2)
        return f(x + t * std::tan(u)) / pi;
    };
    quad::Options opt;
    opt.rel_tol = 1e-12;
    opt.abs_tol = 1e-13;
    opt.max_intervals = 20000;
    const double h = 0.5 * pi;
    std::vector<double> pts{-h, h};
    for (double shift : {-0.9, -0.3, 0.0, 0.3, 0.9}) pts.push_back(std::atan((shift - x) / t));
    std::sort(pts.begin(), pts.end());
    return quad::integrate(integrand, std::span<const double>(pts), opt).value;
}

double step_profile(double u) { return std::erf(u / 0.3); }

bool within(const Estimate& e, double reference, double sigmas = 4.0) {
    return std::abs(e.value - reference) <= sigmas * e.error + 1e-12;
}

}  // namespace

TEST_CASE("constants are reproduced exactly by every family", "[engine]") {
    const std::vector<MeasureFamily> families{
        MeasureFamily::gaussian_heat(2),
        MeasureFamily::fractional_heat(2, 0.4),
        MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.7),
        MeasureFamily::classical_ou(rotating_q()),
        MeasureFamily::gross_mixture(rotating_q(), 0.6),
        MeasureFamily::p_scaled(rotating_q(), 1.3),
    };
    const auto c = functions::constant(2, 2.5);
    for (const auto& fam : families) {
        const auto drift = fam.natural_drift();
        CHECK(apply_semigroup(fam, drift, c, 0.7, point(0.3, -1.0)).value == 2.5);
        CHECK(apply_semigroup(fam, drift, c, 0.7, point(0.3, -1.0), MethodSpec::monte_carlo(1000, 3)).value ==
              Approx(2.5).epsilon(1e-15));
    }
}

TEST_CASE("fractional heat semigroup damps cosines by exp(-t k^{2s})", "[engine]") {
    for (double s : {0.3, 0.5, 0.85}) {
        for (double t : {0.1, 1.0, 4.0}) {
            const double k = 1.7;
            const auto fam = MeasureFamily::fractional_heat(1, s);
            const auto f = functions::cosine(point(k));
            const double x = 0.4;
            const auto r = apply_semigroup(fam, fam.natural_drift(), f, t, point(x));
            const double expect = std::exp(-t * std::pow(k, 2 * s)) * std::cos(k * x);
            CHECK(r.value == Approx(expect).margin(1e-9));
        }
    }
}

TEST_CASE("Gaussian heat semigroup on cos and its derivatives", "[engine]") {
    const auto fam = MeasureFamily::gaussian_heat(1);
    const auto drift = fam.natural_drift();
    const auto f = functions::cosine(point(1.0));
    const double e = std::exp(-1.0);
    const Vector h = point(1.0);

    CHECK(apply_semigroup(fam, drift, f, 1.0, point(0.0)).value == Approx(e).epsilon(1e-12));
    CHECK(gateaux_derivative_fomin(fam, drift, f, 1.0, point(pi / 2), h).value == Approx(-e).epsilon(1e-12));
    const std::vector<Vector> two{h, h};
    CHECK(nth_derivative_equipartition(fam, drift, f, 1.0, point(0.0), two).value == Approx(-e).epsilon(1e-12));
    const std::vector<Vector> three{h, h, h};
    CHECK(nth_derivative_equipartition(fam, drift, f, 1.0, point(pi / 2), three).value == Approx(e).epsilon(1e-12));

    const auto mc = MethodSpec::monte_carlo(200000, 11);
    CHECK(within(apply_semigroup(fam, drift, f, 1.0, point(0.0), mc), e));
    CHECK(within(gateaux_derivative_fomin(fam, drift, f, 1.0, point(pi / 2), h, mc), -e));
    CHECK(within(nth_derivative_equipartition(fam, drift, f, 1.0, point(0.0), two, mc), -e));
}

TEST_CASE("ridge quadrature matches closed forms for a Gaussian law", "[engine]") {
    // P_t erf(x/w) = erf(x / sqrt(w² + 4t)) for the variance-2t heat law.
    const auto fam = MeasureFamily::gaussian_heat(1);
    const double w = 0.3, t = 0.2;
    const auto f = functions::smoothed_step(point(1.0), w);
    const double sw = std::sqrt(w * w + 4 * t);
    SemigroupEvaluator ev(fam, fam.natural_drift(), f, t, {}, 2);
    for (double x : {-0.7, 0.0, 0.25, 1.5}) {
        const double gauss = std::exp(-x * x / (sw * sw));
        CHECK(ev.value(point(x)).value == Approx(std::erf(x / sw)).margin(1e-10));
        CHECK(ev.derivative(point(x), point(1.0)).value == Approx(2 / std::sqrt(pi) / sw * gauss).margin(1e-9));
        const std::vector<Vector> two{point(1.0), point(1.0)};
        const double second = -4 * x / (std::sqrt(pi) * sw * sw * sw) * gauss;
        CHECK(ev.derivative_n(point(x), two).value == Approx(second).margin(1e-8));
    }
}

TEST_CASE("ridge quadrature under the s = 1/2 law matches Cauchy convolution", "[engine]") {
    const auto fam = MeasureFamily::fractional_heat(1, 0.5);
    const auto f = functions::smoothed_step(point(1.0), 0.3);
    for (double t : {0.05, 0.5, 2.0}) {
        SemigroupEvaluator ev(fam, fam.natural_drift(), f, t);
        for (double x : {-0.4, 0.0, 1.1}) {
            CHECK(ev.value(point(x)).value == Approx(cauchy_smoothing(step_profile, t, x)).margin(1e-8));
            const double d = 1e-4;
            const double fd = (cauchy_smoothing(step_profile, t, x + d) - cauchy_smoothing(step_profile, t, x - d)) / (2 * d);
            CHECK(ev.derivative(point(x), point(1.0)).value == Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("Fomin derivative agrees with finite differences of P_t f", "[engine]") {
    const auto fam = MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.7);
    const auto drift = fam.natural_drift();
    const auto f = functions::trig_polynomial(
        2, 0.1, {TrigTerm{1.0, point(1.0, 0.5), 0.2}, TrigTerm{0.4, point(-2.0, 1.0), 1.0}});
    for (double t : {0.05, 0.5, 2.0}) {
        SemigroupEvaluator ev(fam, drift, f, t);
        const Vector x = point(0.3, -0.8);
        for (const auto& h : {point(1.0, 0.0), point(0.6, -0.8)}) {
            const double d = finite_difference_step(x);
            const double fd = (ev.value(x + d * h).value - ev.value(x - d * h).value) / (2 * d);
            const double an = ev.derivative(x, h).value;
            CHECK(std::abs(an - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("Monte Carlo derivative agrees with quadrature under mixture laws", "[engine]") {
    const auto fam = MeasureFamily::fractional_heat(1, 0.6);
    const auto f = functions::smoothed_step(point(1.0), 0.5, 0.2);
    const double t = 0.4;
    SemigroupEvaluator quad(fam, fam.natural_drift(), f, t);
    SemigroupEvaluator mc(fam, fam.natural_drift(), f, t, MethodSpec::monte_carlo(200000, 5));
    const Vector x = point(0.1);
    CHECK(within(mc.value(x), quad.value(x).value));
    CHECK(within(mc.derivative(x, point(1.0)), quad.derivative(x, point(1.0)).value));
}

TEST_CASE("ou_fractional law sums to the quadrature symbol", "[engine]") {
    const auto fam = MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.6);
    const double t = 0.8;
    const auto law = fam.law(t);
    const OUFracSymbol symbol(OUFracParams{rotating_q(), rotating_b(), 0.6}, t);
    for (const auto& xi : {point(1.0, 0.0), point(-0.3, 2.0), point(4.0, 1.0)}) {
        CHECK(law.log_char(xi) == Approx(symbol.exponent(xi)).epsilon(1e-12));
    }
    // Empirical characteristic function of the sampler.
    RandomStream stream(17);
    const Vector xi = point(0.8, -0.5);
    const int n = 40000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::cos(xi.dot(sample_law(law, stream).y));
    CHECK(acc / n == Approx(std::exp(-symbol.exponent(xi))).margin(4.0 / std::sqrt(n)));
}

TEST_CASE("equivalent parametrizations give identical laws", "[engine]") {
    const Matrix q = Matrix::Identity(1, 1);
    const auto ou = MeasureFamily::classical_ou(q);
    // p = 2 rescales the time-1/2 Gaussian, so it matches the OU law with covariance Q/2.
    const auto p2 = MeasureFamily::p_scaled(q, 2.0);
    const auto ou_half = MeasureFamily::classical_ou(0.5 * q);
    Vector a(1), qq(1);
    a << -1.0;
    qq << 2.0;
    const auto spectral = MeasureFamily::truncated_spectral(a, qq);
    const auto f = functions::cosine(point(1.3), 1.0, 0.4);
    for (double t : {0.1, 1.0}) {
        const double ref = apply_semigroup(ou, ou.natural_drift(), f, t, point(0.5)).value;
        const double half = apply_semigroup(ou_half, ou_half.natural_drift(), f, t, point(0.5)).value;
        CHECK(apply_semigroup(p2, p2.natural_drift(), f, t, point(0.5)).value == Approx(half).epsilon(1e-13));
        CHECK(apply_semigroup(spectral, spectral.natural_drift(), f, t, point(0.5)).value == Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("Gaussian Fomin weights", "[engine]") {
    const auto fam = MeasureFamily::gaussian_heat(1);
    const auto drift = fam.natural_drift();
    const double exact = std::sqrt(2 / pi) / std::sqrt(2.0);
    CHECK(fomin_l1_norm_exact(fam, drift, 1.0, point(1.0)) == Approx(exact).epsilon(1e-14));
    const auto mc = fomin_l1_norm(fam, drift, 1.0, point(1.0), 200000, 2);
    CHECK(std::abs(mc.value / exact - 1) < 0.01);
    CHECK(fomin_beta(fam, drift, 1.0, point(1.0), point(3.0)) == Approx(-1.5));

    // E β = 0 and E[f' + β f] = 0 for f = y².
    const auto one = fomin_ibp_residual(fam, drift, 1.0, point(1.0), functions::constant(1, 1.0), 100000, 4);
    CHECK(std::abs(one.value) <= 4 * one.error);
    const auto sq = fomin_ibp_residual(fam, drift, 1.0, point(1.0), functions::monomial(point(1.0), 2), 100000, 4);
    CHECK(std::abs(sq.value) <= 4 * sq.error);

    const auto cm = MeasureFamily::classical_ou(rotating_q());
    const auto cm_drift = cm.natural_drift();
    for (const auto& h : cm.h_norm().unit_directions()) {
        CHECK(cm.h_norm().norm(h) == Approx(1.0));
        const double t = 0.3;
        const double expect = std::sqrt(2 / pi) * std::exp(-t) / std::sqrt(-std::expm1(-2 * t));
        CHECK(fomin_l1_norm_exact(cm, cm_drift, t, h) == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("skew convolution residuals vanish", "[engine]") {
    {
        const auto fam = MeasureFamily::fractional_heat(1, 0.5);
        const auto f = functions::cosine(point(1.0));
        const auto r = skew_convolution_residual(fam, fam.natural_drift(), 0.3, 0.5, f, point(0.2), 100000, 9);
        CHECK(std::abs(r.value) <= 4 * r.error);
    }
    {
        const auto fam = MeasureFamily::ou_fractional(rotating_q(), rotating_b(), 0.7);
        const auto f = functions::smoothed_step(point(1.0, 0.5), 0.4);
        const auto r = skew_convolution_residual(fam, fam.natural_drift(), 0.3, 0.3, f, point(0.1, 0.2), 100000, 9);
        CHECK(std::abs(r.value) <= 4 * r.error);
    }
    const auto fam = MeasureFamily::gaussian_heat(1);
    const auto zero = skew_convolution_residual(fam, fam.natural_drift(), 0.0, 0.5, functions::cosine(point(1.0)),
                                                point(0.0), 10, 1);
    CHECK(zero.value == 0.0);
}

TEST_CASE("semigroup is a contraction in the sup norm", "[engine]") {
    const auto fam = MeasureFamily::gross_mixture(rotating_q(), 0.45);
    const auto f = functions::weierstrass(point(1.0, 0.0), 0.5, 8);
    SemigroupEvaluator ev(fam, fam.natural_drift(), f, 0.2);
    double worst = 0.0;
    for (double a = -3.0; a <= 3.0; a += 0.37) worst = std::max(worst, std::abs(ev.value(point(a, 0.5 * a)).value));
    CHECK(worst <= f.bound() + 1e-10);
}

TEST_CASE("drift semigroups compose", "[engine]") {
    Vector eig(3);
    eig << -1.0, -2.0, -5.0;
    const std::vector<Vector> probes{point(1.0, 0.0), point(0.3, -2.0)};
    const std::vector<Vector> probes3{Vector::Ones(3), Vector::LinSpaced(3, -1.0, 2.0)};
    CHECK(DriftSemigroup::matrix_exp(rotating_b()).composition_residual(0.4, 1.3, probes) < 1e-13);
    CHECK(DriftSemigroup::scalar_decay(2).composition_residual(0.4, 1.3, probes) < 1e-15);
    CHECK(DriftSemigroup::spectral_diag(eig).composition_residual(0.4, 1.3, probes3) < 1e-15);
    CHECK(DriftSemigroup::matrix_exp(rotating_b()).growth_rate() == Approx(-0.5));
}

TEST_CASE("Monte Carlo results do not depend on the worker count", "[engine]") {
    const auto fam = MeasureFamily::fractional_heat(2, 0.6);
    const auto f = functions::smoothed_step(point(1.0, 1.0), 0.5);
    const auto mc = MethodSpec::monte_carlo(20000, 77);
    set_worker_count(1);
    const auto a = gateaux_derivative_fomin(fam, fam.natural_drift(), f, 0.5, point(0.1, 0.0), point(1.0, 0.0), mc);
    set_worker_count(3);
    const auto b = gateaux_derivative_fomin(fam, fam.natural_drift(), f, 0.5, point(0.1, 0.0), point(1.0, 0.0), mc);
    set_worker_count(0);
    CHECK(a.value == b.value);
    CHECK(a.error == b.error);
}

TEST_CASE("engine rejects unsupported requests", "[engine]") {
    const auto frac = MeasureFamily::fractional_heat(1, 0.5);
    const auto step = functions::smoothed_step(point(1.0), 0.3);
    CHECK_THROWS_AS(fomin_beta(frac, frac.natural_drift(), 1.0, point(1.0), point(0.0)), MethodUnavailable);
    const std::vector<Vector> two{point(1.0), point(1.0)};
    CHECK_THROWS_AS(nth_derivative_equipartition(frac, frac.natural_drift(), step, 1.0, point(0.0), two),
                    MethodUnavailable);
    CHECK_THROWS_AS(apply_semigroup(frac, frac.natural_drift(), functions::affine(point(1.0)), 1.0, point(0.0)),
                    InvalidArgument);
    const auto heat = MeasureFamily::gaussian_heat(1);
    CHECK_THROWS_AS(gateaux_derivative_fomin(heat, heat.natural_drift(), step, 1e-8, point(0.0), point(1.0)),
                    InvalidArgument);
    CHECK_THROWS_AS(apply_semigroup(heat, heat.natural_drift(), step, 1.0, point(0.0, 1.0)), InvalidArgument);
    CHECK_THROWS_AS(MeasureFamily::fractional_heat(1, 1.2), InvalidArgument);
    CHECK(apply_semigroup(heat, heat.natural_drift(), step, 0.0, point(0.2)).value == step.value(point(0.2)));
}
