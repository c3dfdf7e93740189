#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mehler/support/linalg.hpp"
#include "mehler/support/numeric.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/quadrature.hpp"
#include "mehler/support/random.hpp"

using namespace mehler;
using Catch::Approx;

TEST_CASE("adaptive quadrature reproduces closed-form integrals", "[support][quad]") {
    SECTION("smooth") {
        auto r = quad::integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0);
        REQUIRE(r.value == Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
        REQUIRE(r.converged);
    }
    SECTION("endpoint singularity") {
        auto r = quad::integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0,
                                 quad::Options{.rel_tol = 1e-9});
        REQUIRE(r.value == Approx(2.0).epsilon(1e-8));
    }
    SECTION("cancelling integrand with l1 tolerance") {
        quad::Options opt;
        opt.rel_tol = 0.0;
        opt.l1_tol = 1e-12;
        auto r = quad::integrate([](double x) { return std::sin(x); }, 0.0, 2.0 * std::numbers::pi, opt);
        REQUIRE(std::abs(r.value) < 1e-11);
        REQUIRE(r.l1 == Approx(4.0).epsilon(0.05));
    }
    SECTION("unreachable tolerance throws") {
        quad::Options opt;
        opt.rel_tol = 1e-14;
        opt.max_intervals = 3;
        REQUIRE_THROWS_AS(quad::integrate([](double x) { return std::abs(x - 0.3333); }, 0.0, 1.0, opt),
                          NumericalFailure);
    }
}

TEST_CASE("Gauss rules integrate polynomials exactly", "[support][quad]") {
    auto gl = quad::gauss_legendre(8);
    double m = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) m += gl.weights[i] * std::pow(gl.nodes[i], 14);
    REQUIRE(m == Approx(2.0 / 15.0).epsilon(1e-13));

    auto gh = quad::gauss_hermite(10);
    double m4 = 0.0, m0 = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        m0 += gh.weights[i];
        m4 += gh.weights[i] * std::pow(gh.nodes[i], 4);
    }
    REQUIRE(m0 == Approx(1.0).epsilon(1e-13));
    REQUIRE(m4 == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("matrix functions", "[support][linalg]") {
    Matrix b(2, 2);
    b << 0.0, 1.0, -1.0, 0.0;
    Matrix e = matrix_exponential(b);
    REQUIRE(e(0, 0) == Approx(std::cos(1.0)).epsilon(1e-14));
    REQUIRE(e(0, 1) == Approx(std::sin(1.0)).epsilon(1e-14));

    Matrix q(2, 2);
    q << 2.0, 0.5, 0.5, 1.0;
    Matrix r = spd_sqrt(q);
    REQUIRE((r * r - q).norm() < 1e-13);

    Matrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    REQUIRE_THROWS_AS(spd_sqrt(bad), InvalidArgument);
}

TEST_CASE("line fits and summation", "[support][numeric]") {
    std::vector<double> x{1, 2, 4, 8, 16}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.75));
    auto fit = fit_loglog(x, y);
    REQUIRE(fit.slope == Approx(-0.75).epsilon(1e-12));
    REQUIRE(fit.residual < 1e-12);

    std::vector<double> ones(1000, 0.1);
    REQUIRE(pairwise_sum(ones) == Approx(100.0).epsilon(1e-14));
}

TEST_CASE("random streams are deterministic and split reproducibly", "[support][random]") {
    RandomStream a(42, 7), b(42, 7);
    for (int i = 0; i < 10; ++i) REQUIRE(a.normal() == b.normal());
    RandomStream c = RandomStream(42).split(3), d = RandomStream(42).split(3), e = RandomStream(42).split(4);
    const double vc = c.uniform();
    REQUIRE(vc == d.uniform());
    REQUIRE(vc != e.uniform());
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("parallel map preserves order and propagates errors", "[support][parallel]") {
    set_worker_count(3);
    auto v = parallel_map(100, [](std::size_t i) { return static_cast<double>(i * i); });
    for (std::size_t i = 0; i < v.size(); ++i) REQUIRE(v[i] == static_cast<double>(i * i));
    REQUIRE_THROWS(parallel_map(10, [](std::size_t i) -> double {
        if (i == 7) throw std::runtime_error("boom");
        return 0.0;
    }));
    set_worker_count(0);
}
