#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mehler/kernels.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/numeric.hpp"
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

// s = 1/2 fractional heat kernel in one dimension (Fourier inversion of e^{-t|ξ|}).
double cauchy(double t, double y) { return t / (pi * (t * t + y * y)); }

OUFracParams isotropic(int dim, double s) { return {2.0 * Matrix::Identity(dim, dim), Matrix::Zero(dim, dim), s}; }

OUFracParams rotating_pair() {
    Matrix q(2, 2), b(2, 2);
    q << 2.0, 0.5, 0.5, 1.0;
    b << 0.5, 0.1, -0.1, 0.5;
    return {q, b, 0.98};
}

// Largest deviation from the reference over the nodes with |x| <= reach, relative to the reference peak.
template <class Ref>
double sup_error_1d(const GriddedKernel& k, double reach, std::size_t stride, Ref&& ref) {
    double err = 0.0, peak = 0.0;
    for (std::size_t j = 0; j < k.grid.nodes; j += stride) {
        const double x = k.grid.coordinate(j);
        if (std::abs(x) > reach) continue;
        const double r = ref(x);
        peak = std::max(peak, r);
        err = std::max(err, std::abs(k.values[j] - r));
    }
    return err / peak;
}

}  // namespace

TEST_CASE("Gaussian heat kernel", "[kernels][gauss]") {
    REQUIRE(gauss_heat_kernel(1, 1.0, point(0.0)) == Approx(1.0 / std::sqrt(4.0 * pi)).epsilon(1e-15));
    REQUIRE(gauss_heat_kernel(2, 0.5, point(0.0, 0.0)) == Approx(1.0 / (2.0 * pi)).epsilon(1e-15));
    for (double x : {0.3, 1.7, 4.0}) REQUIRE(gauss_heat_kernel(1, 1.0, point(x)) == gauss_heat_kernel(1, 1.0, point(-x)));
    const double mass =
        quad::integrate([](double x) { return gauss_heat_kernel(1, 0.3, point(x)); }, -30.0, 30.0).value;
    REQUIRE(mass == Approx(1.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(gauss_heat_kernel(1, 0.0, point(0.0)), InvalidArgument);
    REQUIRE_THROWS_AS(gauss_heat_kernel(2, 1.0, point(0.0)), InvalidArgument);
}

TEST_CASE("half-stable kernel is the Cauchy kernel", "[kernels][frac][oracle]") {
    REQUIRE(frac_heat_kernel(1, 0.5, 1.0, point(0.0)) == Approx(1.0 / pi).epsilon(1e-8));
    REQUIRE(frac_heat_kernel(1, 0.5, 2.0, point(1.0)) == Approx(2.0 / (5.0 * pi)).epsilon(1e-8));
    FracHeatKernel p(1, 0.5);
    for (double t : logspace(0.1, 10.0, 7)) {
        for (double y : {0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0}) {
            INFO("t = " << t << ", y = " << y);
            REQUIRE(p.value(t, point(y)) == Approx(cauchy(t, y)).epsilon(1e-6));
        }
    }
}

TEST_CASE("fractional kernel integrates to one", "[kernels][frac][property]") {
    const double s = 0.7;
    FracHeatKernel p(1, s);
    const double reach = 1e4;
    quad::Options opt;
    opt.rel_tol = 1e-9;
    std::vector<double> pts{0.0, 1.0, 10.0, 100.0, 1000.0, reach};
    const double body = 2.0 * quad::integrate([&](double y) { return p.unit_profile(y); }, std::span<const double>(pts), opt).value;
    // p_{s,1}(y) ≤ Γ(1+2s) sin(πs) / π · |y|^{-1-2s} beyond the reach.
    const double lead = std::tgamma(1.0 + 2.0 * s) * std::sin(pi * s) / pi;
    const double tail = 2.0 * lead * std::pow(reach, -2.0 * s) / (2.0 * s);
    REQUIRE(tail < 1e-4);
    REQUIRE(body + tail == Approx(1.0).margin(1e-4));
    REQUIRE(body <= 1.0 + 1e-8);
    for (double y : logspace(1e-3, 1e4, 29)) REQUIRE(p.unit_profile(y) > 0.0);
}

TEST_CASE("homogeneity against direct mixing with the scaled subordinator", "[kernels][frac][property]") {
    for (double s : {0.35, 0.75}) {
        for (int dim : {1, 2}) {
            FracHeatKernel p(dim, s);
            for (double t : {0.2, 3.0}) {
                Vector x = dim == 1 ? point(0.8) : point(0.6, -0.9);
                INFO("s = " << s << ", N = " << dim << ", t = " << t);
                REQUIRE(p.value(t, x) == Approx(p.value_unscaled(t, x)).epsilon(1e-6));
            }
        }
    }
    FracHeatKernel p2(2, 0.5);
    const Vector a = point(0.3, 0.4), b = point(0.5, 0.0);
    REQUIRE(p2.value(1.3, a) == Approx(p2.value(1.3, b)).epsilon(1e-12));
}

TEST_CASE("fractional kernel gradient", "[kernels][frac]") {
    FracHeatKernel p(2, 0.6);
    const Vector x = point(0.7, -0.2);
    const double d = 1e-5;
    const Vector g = p.gradient(0.5, x);
    for (int k = 0; k < 2; ++k) {
        Vector e = Vector::Zero(2);
        e(k) = d;
        const double fd = (p.value(0.5, x + e) - p.value(0.5, x - e)) / (2.0 * d);
        REQUIRE(g(k) == Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("gradient L1 norm of the fractional kernel", "[kernels][frac][oracle]") {
    REQUIRE(frac_kernel_grad_l1(1, 0.5, 1.0, 0) == Approx(2.0 / pi).epsilon(1e-8));
    for (double s : {0.35, 0.75}) {
        const double ratio = frac_kernel_grad_l1(2, s, 0.05, 1) / frac_kernel_grad_l1(2, s, 0.8, 1);
        REQUIRE(ratio == Approx(std::pow(16.0, 0.5 / s)).epsilon(1e-12));
    }
    REQUIRE_THROWS_AS(frac_kernel_grad_l1(1, 0.5, 1.0, 1), InvalidArgument);

    SECTION("grid differentiation and summation") {
        FracHeatKernel p(1, 0.5);
        const double h = 0.02, reach = 100.0;
        double total = 0.0, prev = p.unit_profile(0.0);
        for (double y = h; y <= reach; y += h) {
            const double cur = p.unit_profile(y);
            total += std::abs(cur - prev);
            prev = cur;
        }
        REQUIRE(2.0 * total == Approx(p.grad_l1(1.0)).epsilon(1e-2));
    }
}

TEST_CASE("OU-fractional symbol", "[kernels][symbol]") {
    Matrix q = Matrix::Identity(1, 1), b = Matrix::Identity(1, 1);
    const OUFracParams scalar{q, b, 0.5};
    REQUIRE(ou_frac_symbol(scalar, 1.0, point(1.0)) == Approx(std::exp(-(1.0 - std::exp(-1.0)) / 2.0)).epsilon(1e-10));
    REQUIRE(ou_frac_symbol(scalar, 1.0, point(-1.0)) == Approx(0.729015504215525).epsilon(1e-10));

    for (double s : {0.3, 0.8}) {
        const auto iso = isotropic(2, s);
        const Vector xi = point(0.4, -1.3);
        const double expected = std::exp(-0.7 * std::pow(std::sqrt(2.0) * xi.norm(), 2.0 * s) / 2.0);
        REQUIRE(ou_frac_symbol(iso, 0.7, xi) == Approx(expected).epsilon(1e-13));
    }

    const auto pair = rotating_pair();
    for (double t : {0.01, 1.0, 10.0}) {
        OUFracSymbol sym(pair, t);
        REQUIRE(sym(point(0.0, 0.0)) == 1.0);
        const Vector xi = point(0.9, 0.35);
        REQUIRE(sym(xi) == Approx(sym(-xi)).epsilon(1e-15));
        // Independent adaptive σ-quadrature.
        const Matrix sq = spd_sqrt(pair.q);
        auto integrand = [&](double sigma) {
            return std::pow((sq * matrix_exponential(-sigma * pair.b.transpose()) * xi).norm(), 2.0 * pair.s);
        };
        const double oracle = 0.5 * quad::integrate(integrand, 0.0, t, quad::Options{.rel_tol = 1e-12}).value;
        REQUIRE(sym.exponent(xi) == Approx(oracle).epsilon(1e-9));
        // Homogeneity of degree 2s in ξ underlies the rescaled kernel.
        REQUIRE(sym.exponent(3.0 * xi) == Approx(std::pow(3.0, 2.0 * pair.s) * sym.exponent(xi)).epsilon(1e-12));
    }

    Matrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    REQUIRE_THROWS_AS(OUFracSymbol(OUFracParams{bad, Matrix::Zero(2, 2), 0.5}, 1.0), InvalidArgument);
    REQUIRE_THROWS_AS(OUFracSymbol(isotropic(2, 0.5), 0.0), InvalidArgument);
}

TEST_CASE("FFT kernel matches the subordinated kernel", "[kernels][fft][oracle]") {
    SECTION("s = 1/2 against the closed-form Cauchy kernel") {
        const auto k = ou_frac_kernel(isotropic(1, 0.5), 1.0);
        // Q = 2I, B = 0: symbol exp(-t |ξ| / √2), the Cauchy kernel at scale t/√2.
        REQUIRE(sup_error_1d(k, 50.0, 1, [](double x) { return cauchy(1.0 / std::sqrt(2.0), x); }) <= 1e-3);
        REQUIRE(k.normalization == Approx(1.0).margin(1e-3));
        REQUIRE(k.imag_residue < 1e-8);
    }
    for (double s : {0.35, 0.5, 0.75}) {
        INFO("s = " << s);
        const double t = 0.6;
        const auto k = ou_frac_kernel(isotropic(1, s), t);
        FracHeatKernel p(1, s);
        const double t_eff = std::pow(2.0, s - 1.0) * t;
        const std::size_t stride = std::max<std::size_t>(1, k.grid.nodes / 4096);
        REQUIRE(sup_error_1d(k, 20.0, stride, [&](double x) { return p.value(t_eff, point(x)); }) <= 1e-3);
        REQUIRE(k.min_value >= -1e-6 * k.peak);
    }
}

TEST_CASE("near-Gaussian exponent approaches the heat kernel", "[kernels][fft]") {
    const auto k = ou_frac_kernel(isotropic(1, 0.999), 1.0);
    REQUIRE(sup_error_1d(k, 30.0, 1, [](double x) { return gauss_heat_kernel(1, 1.0, point(x)); }) <= 1e-2);
}

TEST_CASE("two-dimensional kernels", "[kernels][fft][property]") {
    SECTION("drift-free kernels are even on mirrored nodes") {
        const auto k = ou_frac_kernel(isotropic(2, 0.6), 0.3);
        const std::size_t n = k.grid.nodes;
        double worst = 0.0;
        for (std::size_t i = 1; i < n; i += 7) {
            for (std::size_t j = 1; j < n; j += 5) {
                worst = std::max(worst, std::abs(k.values[i * n + j] - k.values[(n - i) * n + (n - j)]));
            }
        }
        REQUIRE(worst <= 1e-14 * k.peak);
    }
    SECTION("non-commuting pair: normalization, positivity and gradient") {
        const auto pair = rotating_pair();
        for (double t : {0.01, 1.0, 10.0}) {
            INFO("t = " << t);
            const auto k = ou_frac_kernel(pair, t, GridPolicy{}, true);
            REQUIRE(k.normalization == Approx(1.0).margin(1e-3));
            REQUIRE(k.min_value >= -1e-6 * k.peak);
            // Gradient integrates to zero.
            REQUIRE(std::abs(pairwise_sum(k.gradient[0]) * k.cell_volume()) < 1e-8 * k.grad_l1(0));
            // Spectral gradient against centred differences of the values.
            const std::size_t n = k.grid.nodes, c = n / 2;
            for (std::size_t off : {std::size_t{3}, std::size_t{17}}) {
                const std::size_t i = c + off, j = c - off / 2;
                const double fd = (k.values[(i + 1) * n + j] - k.values[(i - 1) * n + j]) / (2.0 * k.grid.spacing);
                REQUIRE(k.gradient[0][i * n + j] == Approx(fd).epsilon(5e-3));
            }
        }
    }
}

TEST_CASE("gradient L1 scaling on (0, 1]", "[kernels][fft][scaling]") {
    const auto times = logspace(1e-2, 1.0, 5);
    const auto half = ou_grad_l1_scaling_check(isotropic(1, 0.5), 0, times);
    REQUIRE(half.fit.slope == Approx(-1.0).margin(0.05));
    const auto low = ou_grad_l1_scaling_check(isotropic(1, 0.35), 0, times);
    REQUIRE(low.fit.slope == Approx(-1.0 / 0.7).margin(0.07));
    // Grid summation against the mixture constant at the effective time 2^{s-1} t.
    FracHeatKernel p(1, 0.5);
    REQUIRE(half.norms.back() == Approx(p.grad_l1(std::pow(2.0, -0.5))).epsilon(1e-3));
    REQUIRE_THROWS_AS(ou_grad_l1_scaling_check(isotropic(1, 0.5), 0, {0.5, 1.0}), InvalidArgument);
}

TEST_CASE("grid failures are explicit", "[kernels][fft]") {
    GridPolicy tiny;
    tiny.max_nodes_1d = 16;
    REQUIRE_THROWS_AS(ou_frac_kernel(isotropic(1, 0.5), 1.0, tiny), NumericalFailure);
    // Periodic sums always carry unit mass, so undersized or coarse grids are
    // caught by the boundary and band-edge checks.
    REQUIRE_THROWS_AS(ou_frac_kernel(isotropic(1, 0.5), 1.0, KernelGrid{1, 64, 0.001}), NumericalFailure);
    REQUIRE_THROWS_AS(ou_frac_kernel(isotropic(1, 0.5), 1.0, KernelGrid{1, 4096, 1.0}), NumericalFailure);
    REQUIRE_THROWS_AS(ou_frac_kernel(isotropic(1, 0.5), 1.0, KernelGrid{1, 100, 0.1}), InvalidArgument);
}

TEST_CASE("kernel export", "[kernels][export]") {
    const auto k = ou_frac_kernel(isotropic(2, 0.5), 1.0, KernelGrid{2, 128, 0.1}, true);
    std::ostringstream csv;
    write_kernel_csv(k, csv, 8);
    std::string header;
    std::istringstream in(csv.str());
    std::getline(in, header);
    REQUIRE(header == "x0,x1,value,d0,d1");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    REQUIRE(rows == 256);
    const auto meta = kernel_metadata(k);
    REQUIRE(meta["dim"] == 2);
    REQUIRE(meta["grid"]["nodes_per_axis"] == 128);
    REQUIRE(meta["Q"][0][0] == 2.0);
}
