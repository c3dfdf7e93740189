#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "mehler/infinite_dim.hpp"
#include "mehler/regularity.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/quadrature.hpp"

using namespace mehler;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

Vector scalar(double a) { return Vector::Constant(1, a); }

// Points x₁e₁ with the remaining coordinates zero.
ProbeSet first_axis_probes(const SpectralModel& model, double lo, double hi, std::size_t n) {
    ProbeSet p;
    for (double a : linspace(lo, hi, n)) p.points.push_back(a * model.mode(1));
    p.directions = {std::sqrt(model.covariance()(0)) * model.mode(1)};
    return p;
}

}  // namespace

TEST_CASE("spectral models", "[infinite_dim]") {
    const auto smoothing = build_model(ModelKind::smoothing_ou, 2000);
    const double t = 0.01;
    const Vector qt = smoothing.covariance_at(t);
    for (int k : {1, 7, 300, 2000}) {
        const double kp2 = k * k * pi * pi;
        CHECK(qt(k - 1) == Approx(-std::expm1(-2.0 * t * kp2) / kp2).epsilon(1e-13));
    }
    CHECK(smoothing.tail_ratio() < 0.01);
    CHECK_THROWS_AS(smoothing.family(), InvalidArgument);

    for (auto kind : {ModelKind::classical_ou, ModelKind::gross, ModelKind::gross_fractional, ModelKind::nongauss_p}) {
        const auto m = build_model(kind, 50);
        CHECK(m.tail_ratio() < 0.01);
        CHECK(m.family().dim() == 50);
        CHECK(m.h_norm().norm(std::sqrt(m.covariance()(3)) * m.mode(4)) == Approx(1.0).epsilon(1e-14));
    }
    const auto ou = build_model(ModelKind::classical_ou, 10);
    CHECK((ou.covariance_at(40.0) - ou.covariance()).norm() < 1e-15);
    const auto gross = build_model(ModelKind::gross, 10);
    CHECK((gross.covariance_at(1.0) - gross.covariance()).norm() == 0.0);
    CHECK((gross.family().law(1.0).covariance() - Matrix(gross.covariance().asDiagonal())).norm() < 1e-14);
    CHECK(model_kind_from_string("gross_fractional") == ModelKind::gross_fractional);

    ModelParams divergent = ModelParams::defaults(ModelKind::gross);
    divergent.q_decay = 1.0;
    CHECK_THROWS_AS(build_model(ModelKind::gross, 50, divergent), InvalidArgument);
    ModelParams flat = ModelParams::defaults(ModelKind::smoothing_ou);
    flat.q_decay = 0.0;
    CHECK_NOTHROW(build_model(ModelKind::smoothing_ou, 50, flat));
    CHECK_THROWS_AS(build_model(ModelKind::gross, 0), InvalidArgument);
    ModelParams bad_p;
    bad_p.p = 2.5;
    CHECK_THROWS_AS(build_model(ModelKind::nongauss_p, 5, bad_p), InvalidArgument);
}

TEST_CASE("smoothing norm", "[infinite_dim]") {
    const auto model = build_model(ModelKind::smoothing_ou, 2000);
    // Per-mode formula k π e^{-tk²π²}/sqrt(1 - e^{-2tk²π²}) maximized over continuous k.
    const double t = 1e-2;
    auto per_mode = [&](double k) {
        const double x = t * k * k * pi * pi;
        return k * pi * std::exp(-x) / std::sqrt(-std::expm1(-2.0 * x));
    };
    const auto best = boost::math::tools::brent_find_minima([&](double k) { return -per_mode(k); }, 1.0, 2000.0, 52);
    const auto n = smoothing_norm(model, t);
    CHECK(n.value == Approx(-best.second).epsilon(1e-7));
    CHECK(n.value == Approx(per_mode(1.0)).epsilon(1e-14));
    CHECK(n.argmax == 1);
    CHECK_FALSE(n.at_truncation);
    CHECK(smoothing_norm(build_model(ModelKind::smoothing_ou, 4000), t).value == Approx(n.value).epsilon(1e-12));

    const auto times = logspace(1e-4, 1e-1, 13);
    const auto fit = smoothing_norm_slope(model, times);
    std::vector<double> oracle;
    for (double s : times) oracle.push_back(pi / std::sqrt(std::expm1(2.0 * s * pi * pi)));
    CHECK(fit.fit.slope == Approx(fit_loglog(times, oracle).slope).epsilon(1e-12));

    ModelParams steep = ModelParams::defaults(ModelKind::smoothing_ou);
    steep.q_decay = 4.0;
    CHECK(smoothing_norm(build_model(ModelKind::smoothing_ou, 10, steep), 1e-4).at_truncation);
    CHECK_THROWS_AS(smoothing_norm(build_model(ModelKind::gross, 5), t), InvalidArgument);
}

TEST_CASE("Cameron-Martin scaling of the classical OU model", "[infinite_dim]") {
    const auto model = build_model(ModelKind::classical_ou, 20);
    const Vector h = std::sqrt(model.covariance()(0)) * model.mode(1);
    const auto half = cameron_martin_scaling(model, std::log(2.0), h, 20000, 1);
    CHECK(half.ratio_exact == Approx(2.0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(half.ratio_numeric == Approx(half.ratio_exact).epsilon(1e-12));
    CHECK(cameron_martin_scaling(model, 40.0, h, 2000, 1).ratio_exact == Approx(1.0).epsilon(1e-15));

    const auto one = cameron_martin_scaling(model, 1.0, h, 200000, 7);
    CHECK(one.beta_expected == Approx(std::sqrt(2.0 / pi) * std::exp(-1.0) / std::sqrt(1.0 - std::exp(-2.0))));
    CHECK(std::abs(one.beta.value - one.beta_expected) < 0.01 * one.beta_expected);
    CHECK(std::abs(one.beta.value - one.beta_expected) < 4.0 * one.beta.error);
}

TEST_CASE("Kato representation", "[infinite_dim]") {
    for (double s : {0.3, 0.5, 0.7}) {
        for (double lambda : {0.5, 1.0, 3.0}) {
            const auto c = kato_constant_integral(s, lambda, KatoKernel::corrected);
            CHECK(c.value == Approx(1.0 / lambda).epsilon(1e-11));
        }
    }
    // The printed kernel reproduces c/λ only when cos(sπ) vanishes.
    CHECK(kato_constant_integral(0.5, 1.0, KatoKernel::as_printed).value == Approx(1.0).epsilon(1e-11));
    CHECK(std::abs(kato_constant_integral(0.3, 1.0, KatoKernel::as_printed).value - 1.0) > 0.1);
    CHECK_THROWS_AS(kato_constant_integral(0.3, 0.5, KatoKernel::as_printed), InvalidArgument);

    const auto model = build_model(ModelKind::gross, 20);
    Vector x = Vector::Zero(20);
    x(0) = 0.4;
    x(1) = -0.3;
    const auto constant = kato_resolvent(model, 0.3, 2.0, functions::constant(20, 3.0), x);
    CHECK(constant.value == Approx(1.5).epsilon(1e-6));

    const auto f = functions::cosine(model.mode(1));
    const double q1 = model.covariance()(0);
    for (double s : {0.3, 0.7}) {
        const double lambda = 1.0;
        const auto kato = kato_resolvent(model, s, lambda, f, x);
        const auto mix = MeasureFamily::gross_mixture(Matrix(model.covariance().asDiagonal()), s);
        const auto direct = resolvent({mix, mix.natural_drift(), f, lambda}, x);
        CHECK(kato.value == Approx(direct.value).epsilon(1e-3));
        CHECK(kato.value == Approx(std::cos(0.4) / (lambda + std::pow(0.5 * q1, s))).epsilon(1e-7));
        CHECK(kato.error < 1e-6);
    }
    CHECK_THROWS_AS(kato_resolvent(build_model(ModelKind::classical_ou, 20), 0.5, 1.0, f, x), InvalidArgument);
}

TEST_CASE("Fomin norm of convolutions", "[infinite_dim]") {
    const Matrix one = Matrix::Identity(1, 1);
    ConvolutionFominOptions opt;
    opt.fit_samples = 100000;
    opt.norm_samples = 100000;
    const auto dirac = convolution_fomin_check(one, ConvolutionPartner::dirac(1), scalar(1.0), opt);
    CHECK(std::abs(dirac.convolution.value - dirac.base) <= 3.0 * dirac.convolution.error + 1e-3 * dirac.base);
    CHECK(dirac.ibp_z_score < 5.0);
    CHECK(dirac.basis_size == 10);

    const auto gauss = convolution_fomin_check(one, ConvolutionPartner::gaussian(one), scalar(1.0), opt);
    CHECK(gauss.convolution.value == Approx(std::sqrt(2.0 / pi) / std::sqrt(2.0)).epsilon(0.01));
    CHECK(gauss.holds());
    CHECK(gauss.ibp_z_score < 5.0);

    // Two-point ν: density ½(φ(z-1) + φ(z+1)), β(z) = -z + tanh z.
    const auto two_point =
        convolution_fomin_check(one, ConvolutionPartner::discrete({scalar(-1.0), scalar(1.0)}, {0.5, 0.5}), scalar(1.0), opt);
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi); };
    const double pts[] = {-12.0, 0.0, 12.0};
    const double oracle = quad::integrate([&](double z) {
                              return std::abs(-z + std::tanh(z)) * 0.5 * (phi(z - 1.0) + phi(z + 1.0));
                          }, std::span<const double>(pts, 3)).value;
    CHECK(two_point.convolution.value == Approx(oracle).epsilon(0.02));
    CHECK(two_point.holds());
    CHECK(oracle < two_point.base);

    Matrix cov(2, 2);
    cov << 1.0, 0.3, 0.3, 0.5;
    Vector v(2);
    v << 1.0, -0.5;
    const auto plane = convolution_fomin_check(cov, ConvolutionPartner::gaussian(cov), v, opt);
    CHECK(plane.convolution.value == Approx(plane.base / std::sqrt(2.0)).epsilon(0.02));

    CHECK_THROWS_AS(ConvolutionPartner::discrete({}, {}), InvalidArgument);
    CHECK_THROWS_AS(convolution_fomin_check(one, ConvolutionPartner::dirac(2), scalar(1.0), opt), InvalidArgument);
}

TEST_CASE("rescaled Fomin derivatives", "[infinite_dim]") {
    const FominMeasure gauss(Matrix::Identity(1, 1), scalar(0.0));
    CHECK(gauss.scaled(2.0).beta(scalar(1.0), scalar(3.0)) == Approx(-3.0 / 4.0).epsilon(1e-15));
    const auto identity = rescaled_beta_check(gauss, 1.0, scalar(1.0), 50000, 3);
    CHECK(identity.pointwise == 0.0);
    CHECK(std::abs(identity.ratio - 1.0) <= 3.0 * identity.ratio_error);

    const auto doubled = rescaled_beta_check(gauss, 2.0, scalar(1.0), 100000, 4);
    CHECK(doubled.pointwise < 1e-14);
    CHECK(std::abs(doubled.ratio - 0.5) <= 3.0 * doubled.ratio_error);

    Matrix cov(2, 2);
    cov << 1.0, 0.2, 0.2, 0.6;
    Vector shift(2);
    shift << 1.5, -0.5;
    Vector h(2);
    h << 0.3, 1.0;
    const auto mixed = rescaled_beta_check(FominMeasure(cov, shift), 0.4, h, 100000, 5);
    CHECK(mixed.pointwise < 1e-12);
    CHECK(std::abs(mixed.ratio - 2.5) <= 3.0 * mixed.ratio_error);
}

TEST_CASE("mixture characteristic function", "[infinite_dim]") {
    ModelParams params = ModelParams::defaults(ModelKind::gross_fractional);
    params.s = 0.6;
    const auto model = build_model(ModelKind::gross_fractional, 50, params);
    const double t = 0.7;
    std::vector<Vector> freqs;
    for (double scale : {0.5, 1.0, 2.0}) {
        Vector a = Vector::Zero(50);
        a(0) = scale;
        a(1) = -0.5 * scale;
        a(4) = 2.0 * scale;
        freqs.push_back(a);
    }
    const auto probes = mixture_characteristic_check(model.family(), t, freqs, 100000, 9);
    for (const auto& p : probes) {
        double quadratic = 0.0;
        for (int k = 0; k < 50; ++k) quadratic += model.covariance()(k) * p.frequency(k) * p.frequency(k);
        CHECK(p.expected == Approx(std::exp(-t * std::pow(0.5 * quadratic, 0.6))).epsilon(1e-13));
        CHECK(std::abs(p.z_score) < 4.0);
        CHECK(std::abs(p.imaginary) < 0.02);
    }
}

TEST_CASE("smoothing exponents of the models", "[infinite_dim]") {
    struct Case {
        ModelKind kind;
        double param;
        double theta;
        double tol;
    };
    const std::vector<Case> cases{{ModelKind::classical_ou, 0.0, 0.5, 0.05},
                                  {ModelKind::gross, 0.0, 0.5, 0.05},
                                  {ModelKind::gross_fractional, 0.5, 1.0, 0.07},
                                  {ModelKind::nongauss_p, 1.0, 1.0, 0.07}};
    const auto times = logspace(1e-3, 1e-1, 7);
    for (const auto& c : cases) {
        ModelParams params = ModelParams::defaults(c.kind);
        params.s = c.kind == ModelKind::gross_fractional ? c.param : params.s;
        params.p = c.kind == ModelKind::nongauss_p ? c.param : params.p;
        const auto model = build_model(c.kind, 50, params);
        CHECK(model.family().theta() == c.theta);
        DecayOptions opt;
        opt.probes = first_axis_probes(model, -1.0, 1.0, 21);
        const auto d = derivative_decay_exponent(model.family(), model.drift(), functions::smoothed_step(model.mode(1), 1e-6),
                                                 1, times, opt);
        INFO(to_string(c.kind));
        CHECK(-d.fit.slope == Approx(c.theta).margin(c.tol));
    }
}

TEST_CASE("truncation stability for cylinder functions", "[infinite_dim]") {
    ModelParams params = ModelParams::defaults(ModelKind::gross_fractional);
    params.s = 0.4;
    const auto small = build_model(ModelKind::gross_fractional, 50, params);
    const auto large = build_model(ModelKind::gross_fractional, 100, params);
    auto cylinder = [](int dim) {
        Vector a = Vector::Zero(dim);
        a(0) = 1.0;
        a(2) = 0.5;
        a(4) = -1.5;
        return functions::cosine(a);
    };
    Vector xs = Vector::Zero(50), xl = Vector::Zero(100);
    xs(0) = xl(0) = 0.3;
    xs(4) = xl(4) = -0.2;
    for (double t : {0.1, 1.0}) {
        const double a = apply_semigroup(small.family(), small.drift(), cylinder(50), t, xs).value;
        const double b = apply_semigroup(large.family(), large.drift(), cylinder(100), t, xl).value;
        CHECK(std::abs(a - b) < 0.01 * std::abs(a));
    }
}
