#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mehler/subordinator.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/numeric.hpp"

using namespace mehler;
using Catch::Approx;

namespace {

// Lévy(1/2) law: Laplace transform e^{-sqrt(λ)}.
double levy_density(double sigma) {
    return std::pow(sigma, -1.5) * std::exp(-0.25 / sigma) / (2.0 * std::sqrt(std::numbers::pi));
}
double levy_cdf(double sigma) { return std::erfc(0.5 / std::sqrt(sigma)); }

// E[τ^q] = Γ(1 - q/s) / Γ(1 - q) for the one-sided s-stable law.
double moment_oracle(double s, double q) { return std::tgamma(1.0 - q / s) / std::tgamma(1.0 - q); }

}  // namespace

TEST_CASE("exponent outside (0,1) is rejected", "[subordinator]") {
    REQUIRE_THROWS_AS(SubordinatorDensity(0.0), InvalidArgument);
    REQUIRE_THROWS_AS(SubordinatorDensity(1.0), InvalidArgument);
    REQUIRE_THROWS_AS(SubordinatorDensity(-0.2), InvalidArgument);
    REQUIRE_THROWS_AS(eta_density(0.5, 0.0), InvalidArgument);
}

TEST_CASE("half-stable density matches the Lévy closed form", "[subordinator][oracle]") {
    REQUIRE(eta_density(0.5, 1.0) == Approx(0.219695644733861).epsilon(1e-9));
    REQUIRE(eta_density(0.5, 0.25) == Approx(0.830214994841189).epsilon(1e-9));
    for (double sigma : logspace(0.05, 10.0, 41)) {
        REQUIRE(eta_density(0.5, sigma) == Approx(levy_density(sigma)).epsilon(1e-8));
    }
    SubordinatorDensity eta(0.5);
    for (double sigma : {0.01, 0.3, 3.0, 50.0, 500.0}) {
        REQUIRE(eta.density_positive_integral(sigma) == Approx(levy_density(sigma)).epsilon(1e-9));
    }
    for (double sigma : {120.0, 1e3, 1e5}) {
        REQUIRE(eta.density_series(sigma) == Approx(levy_density(sigma)).epsilon(1e-12));
    }
}

TEST_CASE("scaled density", "[subordinator][oracle]") {
    REQUIRE(eta_density_scaled(0.5, 1.0, 1.0) == eta_density(0.5, 1.0));
    REQUIRE(eta_density_scaled(0.5, 4.0, 1.0) == Approx(0.0206669853540921).epsilon(1e-9));
    SECTION("rescaling identity and an independent quadrature path") {
        for (double s : {0.3, 0.7}) {
            SubordinatorDensity eta(s);
            for (double t : {0.5, 2.0}) {
                for (double sigma : {0.2, 1.0, 5.0}) {
                    const double scaled = eta.density_scaled(t, sigma) * std::pow(t, 1.0 / s);
                    const double x = std::pow(t, -1.0 / s) * sigma;
                    REQUIRE(scaled == Approx(eta.density(x)).epsilon(1e-14));
                    if (x < eta.series_threshold()) {
                        REQUIRE(scaled == Approx(eta.density_positive_integral(x)).epsilon(1e-8));
                    }
                }
            }
        }
    }
}

TEST_CASE("oscillatory and positive representations agree where both apply", "[subordinator]") {
    for (double s : {0.2, 0.3, 0.45}) {
        SubordinatorDensity eta(s);
        for (double sigma : {0.5, 1.0, 4.0, 20.0}) {
            double osc = 0.0;
            REQUIRE_NOTHROW(osc = eta.density_oscillatory(sigma));
            REQUIRE(osc == Approx(eta.density_positive_integral(sigma)).epsilon(1e-9));
        }
    }
}

TEST_CASE("normalization and non-negativity", "[subordinator][property]") {
    for (double s : {0.3, 0.5, 0.7, 0.9}) {
        SubordinatorDensity eta(s);
        INFO("s = " << s);
        REQUIRE(eta.fractional_moment(0.0) == Approx(1.0).margin(1e-6));
        for (double sigma : logspace(1e-3, 1e3, 61)) REQUIRE(eta.density(sigma) >= -1e-10);
    }
    SubordinatorDensity eta(0.3);
    // ∫ η_t = 1 for t = 2 follows from the same integral after rescaling.
    REQUIRE(eta.fractional_moment(0.0) == Approx(1.0).margin(1e-6));
}

TEST_CASE("tail decay follows the leading power law", "[subordinator]") {
    // η(σ) σ^{1+s} → Γ(1+s) sin(πs) / π as σ → ∞.
    const double s = 0.7;
    SubordinatorDensity eta(s);
    const double lead = std::tgamma(1.0 + s) * std::sin(std::numbers::pi * s) / std::numbers::pi;
    double prev = eta.density(1e3);
    REQUIRE(prev * std::pow(1e3, 1.0 + s) == Approx(lead).epsilon(2e-2));
    for (double sigma : logspace(1e3, 1e6, 13)) {
        const double v = eta.density(sigma);
        REQUIRE(v <= prev);
        prev = v;
    }
    REQUIRE(eta.density(1e5) < 1e-8);
    REQUIRE(prev * std::pow(1e6, 1.0 + s) == Approx(lead).epsilon(1e-4));
}

TEST_CASE("fractional moments", "[subordinator][oracle]") {
    REQUIRE(fractional_moment(0.5, -0.5) == Approx(2.0 / std::sqrt(std::numbers::pi)).epsilon(1e-8));
    for (double s : {0.3, 0.5, 0.7, 0.9}) {
        for (double q : {-0.5, -0.25, 0.1}) {
            if (q >= s) continue;
            INFO("s = " << s << ", q = " << q);
            REQUIRE(fractional_moment(s, q) == Approx(moment_oracle(s, q)).epsilon(1e-7));
        }
    }
    SubordinatorDensity eta(0.7);
    const double coarse = eta.fractional_moment(-0.5, 48);
    const double fine = eta.fractional_moment(-0.5, 96);
    REQUIRE(coarse > 0.0);
    REQUIRE(std::abs(coarse - fine) < 1e-5 * fine);
    REQUIRE_THROWS_AS(eta.fractional_moment(-0.6), InvalidArgument);
    REQUIRE_THROWS_AS(eta.fractional_moment(0.7), InvalidArgument);
}

TEST_CASE("cached table honours its interpolation budget", "[subordinator][table]") {
    for (double s : {0.3, 0.5, 0.75}) {
        auto table = SubordinatorTable::get(s);
        INFO("s = " << s);
        REQUIRE(table->max_midpoint_error() <= 1e-8);
        REQUIRE(table.get() == SubordinatorTable::get(s).get());
        for (double sigma : logspace(1e-3, 1e4, 37)) {
            const double exact = table->exact().density(sigma);
            REQUIRE(table->density(sigma) == Approx(exact).epsilon(2e-8).margin(1e-300));
        }
    }
    auto half = SubordinatorTable::get(0.5);
    for (double sigma : logspace(0.01, 100.0, 29)) REQUIRE(half->density(sigma) == Approx(levy_density(sigma)).epsilon(2e-8));
}

TEST_CASE("positive-stable sampler", "[subordinator][sampler]") {
    SubordinatorDensity eta(0.5);
    RandomStream stream(2024);
    const std::size_t n = 1000000;
    std::vector<double> draws(n);
    for (auto& d : draws) d = eta.sample(1.0, stream);
    std::sort(draws.begin(), draws.end());

    SECTION("Kolmogorov distance against the closed-form CDF") {
        double ks = 0.0;
        for (std::size_t i = 0; i < n; i += 7) {
            const double f = levy_cdf(draws[i]);
            ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
        }
        REQUIRE(ks < 0.003);
    }
    SECTION("median") { REQUIRE(draws[n / 2] == Approx(1.0990546691588662).epsilon(5e-3)); }
    SECTION("inverse square-root moment within three standard errors") {
        for (double s : {0.35, 0.5, 0.75}) {
            SubordinatorDensity e(s);
            RandomStream st(99);
            double m = 0, m2 = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = 1.0 / std::sqrt(e.sample(1.0, st));
                m += v;
                m2 += v * v;
            }
            m /= n;
            const double se = std::sqrt((m2 / n - m * m) / n);
            INFO("s = " << s);
            REQUIRE(std::abs(m - e.fractional_moment(-0.5)) < 3.0 * se);
        }
    }
    SECTION("determinism and time scaling") {
        RandomStream a(5), b(5);
        for (int i = 0; i < 5; ++i) REQUIRE(eta.sample(2.0, a) == eta.sample(2.0, b));
        RandomStream c(6), d(6);
        for (int i = 0; i < 5; ++i) REQUIRE(eta.sample(3.0, c) == Approx(9.0 * eta.sample(1.0, d)).epsilon(1e-13));
        RandomStream z(1);
        REQUIRE(eta.sample(0.0, z) == 0.0);
    }
}
