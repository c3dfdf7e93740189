#include "mehler/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mehler/support/errors.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/quadrature.hpp"

namespace mehler {

namespace {

constexpr double pi = std::numbers::pi;

void check_point(int dim, const Vector& x) {
    require(dim >= 1, "dimension must be positive");
    require(x.size() == dim, "point dimension does not match kernel dimension");
    require(x.allFinite(), "point must be finite");
}

// ∫ ξ^{-extra} (4πξ)^{-N/2} e^{-r²/4ξ} η_time(ξ) dξ, integrated in L = log ξ.
// `left` is the smallest ξ at which η_time is representable.
template <class Eta>
double gaussian_mixture(int dim, double s, double radius, double extra, double time, double left, Eta&& eta) {
    const double half_dim = 0.5 * dim;
    const double r2 = radius * radius;
    const double log_norm = -half_dim * std::log(4.0 * pi);
    auto integrand = [&](double log_xi) {
        const double xi = std::exp(log_xi);
        const double e = eta(xi);
        if (e <= 0.0) return 0.0;
        return std::exp(log_norm + log_xi * (1.0 - extra - half_dim) - 0.25 * r2 / xi) * e;
    };

    const double log_mode = std::log(time) / s;
    double lo = std::log(left);
    if (r2 > 0.0) lo = std::max(lo, std::log(r2 / (4.0 * 740.0)));
    const double log_gauss = r2 > 0.0 ? std::log(0.25 * r2) : log_mode;
    const double decay = half_dim + s + extra;
    const double ref = std::max(log_mode, log_gauss) + 2.0;
    const double hi = ref + 38.0 / decay;

    std::vector<double> pts{lo, hi};
    for (double p : {log_mode - 2.0, log_mode, log_mode + 2.0, log_gauss, ref}) {
        if (p > lo && p < hi) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    quad::Options opt;
    opt.rel_tol = 1e-11;
    const double body = quad::integrate(integrand, std::span<const double>(pts), opt).value;
    // Beyond `hi` the integrand decays like e^{-decay L}.
    const double tail = integrand(hi) / decay;
    return body + tail;
}

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place backward FFT of a dense complex array (1D or square 2D).
void inverse_fft(std::vector<std::complex<double>>& data, int dim, std::size_t n) {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = dim == 1 ? fftw_plan_dft_1d(static_cast<int>(n), ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE)
                        : fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), ptr, ptr, FFTW_BACKWARD,
                                           FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw NumericalFailure("FFTW could not create a plan");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

struct RescaledInversion {
    std::vector<double> values;
    std::vector<std::vector<double>> gradient;
    double imag_residue = 0.0;
    double band_edge = 0.0;
};

// g̃ = (2π)^{-N} ∫ φ̃(ξ) e^{iξ·x} dξ on the grid, and ∂_k g̃ for each requested axis.
RescaledInversion invert_symbol(const OUFracSymbol& symbol, const KernelGrid& grid, const std::vector<int>& axes) {
    const int dim = grid.dim;
    const std::size_t n = grid.nodes;
    const std::size_t total = grid.size();
    const double dxi = 2.0 * pi / (static_cast<double>(n) * grid.spacing);
    const double inv_t = 1.0 / symbol.time();
    const double prefactor = std::pow(dxi / (2.0 * pi), dim);
    auto freq = [&](std::size_t m) { return (static_cast<double>(m) - static_cast<double>(n / 2)) * dxi; };
    auto sign = [](std::size_t j) { return (j % 2 == 0) ? 1.0 : -1.0; };

    // Symbol samples with the (-1)^m centring factor.
    std::vector<double> spectrum(total);
    const std::size_t rows = dim == 1 ? 1 : n;
    parallel_map(rows, [&](std::size_t i) {
        Vector xi(dim);
        for (std::size_t j = 0; j < n; ++j) {
            double sg = sign(j);
            if (dim == 1) {
                xi(0) = freq(j);
            } else {
                xi(0) = freq(i);
                xi(1) = freq(j);
                sg *= sign(i);
            }
            const std::size_t idx = dim == 1 ? j : i * n + j;
            spectrum[idx] = sg * std::exp(-symbol.exponent(xi) * inv_t);
        }
        return 0;
    });

    RescaledInversion out;
    for (std::size_t idx = 0; idx < total; ++idx) {
        const bool edge = dim == 1 ? idx == 0 : (idx / n == 0 || idx % n == 0);
        if (edge) out.band_edge = std::max(out.band_edge, std::abs(spectrum[idx]));
    }

    auto index_of = [&](std::size_t idx, int axis) { return dim == 1 ? idx : (axis == 0 ? idx / n : idx % n); };

    std::vector<std::complex<double>> buffer(total);
    auto transform = [&](int axis, std::vector<double>& target, double& residue) {
        for (std::size_t idx = 0; idx < total; ++idx) {
            if (axis < 0) {
                buffer[idx] = {spectrum[idx], 0.0};
            } else {
                buffer[idx] = {0.0, freq(index_of(idx, axis)) * spectrum[idx]};
            }
        }
        inverse_fft(buffer, dim, n);
        target.resize(total);
        double imag = 0.0;
        for (std::size_t idx = 0; idx < total; ++idx) {
            const double sg = dim == 1 ? sign(idx) : sign(idx / n) * sign(idx % n);
            target[idx] = prefactor * sg * buffer[idx].real();
            imag = std::max(imag, prefactor * std::abs(buffer[idx].imag()));
        }
        residue = imag;
    };

    double imag = 0.0;
    transform(-1, out.values, imag);
    const double peak = *std::max_element(out.values.begin(), out.values.end());
    out.imag_residue = peak > 0.0 ? imag / peak : imag;
    out.gradient.resize(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
        double unused = 0.0;
        transform(axes[a], out.gradient[a], unused);
    }
    return out;
}

GriddedKernel assemble(const OUFracParams& params, const OUFracSymbol& symbol, double t, const KernelGrid& rescaled,
                       const std::vector<int>& axes) {
    rescaled.validate();
    require(rescaled.dim == symbol.dim(), "grid dimension does not match the symbol");
    RescaledInversion inv = invert_symbol(symbol, rescaled, axes);

    const int dim = rescaled.dim;
    const double scale = std::pow(t, 0.5 / params.s);
    const double value_factor = std::pow(scale, -dim);
    const double grad_factor = value_factor / scale;

    GriddedKernel k;
    k.grid = KernelGrid{dim, rescaled.nodes, rescaled.spacing * scale};
    k.scale = scale;
    k.s = params.s;
    k.t = t;
    k.q = params.q;
    k.b = params.b;
    k.imag_residue = inv.imag_residue;
    k.band_edge = inv.band_edge;
    k.values = std::move(inv.values);
    for (double& v : k.values) v *= value_factor;
    k.gradient.resize(dim);
    for (std::size_t a = 0; a < axes.size(); ++a) {
        k.gradient[axes[a]] = std::move(inv.gradient[a]);
        for (double& v : k.gradient[axes[a]]) v *= grad_factor;
    }
    k.peak = *std::max_element(k.values.begin(), k.values.end());
    k.min_value = *std::min_element(k.values.begin(), k.values.end());
    k.normalization = pairwise_sum(k.values) * k.cell_volume();
    const std::size_t n = k.grid.nodes;
    double boundary = 0.0;
    for (std::size_t idx = 0; idx < k.values.size(); ++idx) {
        const bool edge = dim == 1 ? idx == 0 : (idx / n == 0 || idx % n == 0);
        if (edge) boundary = std::max(boundary, std::abs(k.values[idx]));
    }
    k.boundary_ratio = boundary / k.peak;

    std::ostringstream diag;
    diag << " (t = " << t << ", s = " << params.s << ", nodes = " << rescaled.nodes
         << ", rescaled spacing = " << rescaled.spacing << ", normalization = " << k.normalization
         << ", min/peak = " << k.min_value / k.peak << ", boundary/peak = " << k.boundary_ratio
         << ", symbol at band edge = " << k.band_edge << ", imaginary residue = " << k.imag_residue << ")";
    if (k.band_edge > 1e-6) throw NumericalFailure("kernel grid too coarse for the symbol" + diag.str());
    if (k.boundary_ratio > 1e-2) throw NumericalFailure("kernel grid too small for the kernel" + diag.str());
    if (!(std::abs(k.normalization - 1.0) <= 1e-3)) {
        throw NumericalFailure("kernel grid fails the normalization check" + diag.str());
    }
    if (k.min_value < -1e-6 * k.peak) {
        throw NumericalFailure("kernel grid has negative excursions beyond 1e-6 of the peak" + diag.str());
    }
    if (k.imag_residue > 1e-8) {
        throw NumericalFailure("inverted kernel is not real" + diag.str());
    }
    return k;
}

std::size_t next_pow2(double x) {
    std::size_t n = 16;
    while (static_cast<double>(n) < x) n *= 2;
    return n;
}

}  // namespace

double gauss_heat_kernel(int dim, double t, const Vector& x) {
    check_point(dim, x);
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    return std::pow(4.0 * pi * t, -0.5 * dim) * std::exp(-x.squaredNorm() / (4.0 * t));
}

// ---------------------------------------------------------------------------
// Fractional heat kernel

FracHeatKernel::FracHeatKernel(int dim, double s) : dim_(dim), s_(s) {
    require(dim >= 1, "dimension must be positive");
    require(s > 0.0 && s < 1.0, "fractional exponent must lie in (0, 1)");
    eta_ = SubordinatorTable::get(s);
}

double FracHeatKernel::mixture(double radius, double extra, double time) const {
    const double left = eta_->support_left() * std::pow(time, 1.0 / s_);
    if (time == 1.0) {
        return gaussian_mixture(dim_, s_, radius, extra, 1.0, left, [this](double xi) { return eta_->density(xi); });
    }
    const SubordinatorDensity& exact = eta_->exact();
    return gaussian_mixture(dim_, s_, radius, extra, time, left,
                            [&exact, time](double xi) { return exact.density_scaled(time, xi); });
}

double FracHeatKernel::unit_profile(double radius) const {
    require(radius >= 0.0 && std::isfinite(radius), "radius must be finite and non-negative");
    return mixture(radius, 0.0, 1.0);
}

double FracHeatKernel::unit_gradient_factor(double radius) const {
    require(radius >= 0.0 && std::isfinite(radius), "radius must be finite and non-negative");
    return 0.5 * mixture(radius, 1.0, 1.0);
}

double FracHeatKernel::value(double t, const Vector& x) const {
    check_point(dim_, x);
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    const double scale = std::pow(t, 0.5 / s_);
    return std::pow(scale, -dim_) * unit_profile(x.norm() / scale);
}

double FracHeatKernel::value_unscaled(double t, const Vector& x) const {
    check_point(dim_, x);
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    return mixture(x.norm(), 0.0, t);
}

Vector FracHeatKernel::gradient(double t, const Vector& x) const {
    check_point(dim_, x);
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    const double scale = std::pow(t, 0.5 / s_);
    const Vector z = x / scale;
    return -std::pow(scale, -dim_ - 1) * unit_gradient_factor(z.norm()) * z;
}

double FracHeatKernel::grad_l1(double t) const {
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    return std::pow(t, -0.5 / s_) * eta_->exact().fractional_moment(-0.5) / std::sqrt(pi);
}

double frac_heat_kernel(int dim, double s, double t, const Vector& x) { return FracHeatKernel(dim, s).value(t, x); }

double frac_kernel_grad_l1(int dim, double s, double t, int axis) {
    require(axis >= 0 && axis < dim, "axis out of range");
    return FracHeatKernel(dim, s).grad_l1(t);
}

// ---------------------------------------------------------------------------
// OU-fractional symbol

OUFracSymbol::OUFracSymbol(const OUFracParams& params, double t, double rel_tol) : s_(params.s), t_(t) {
    const auto dim = params.q.rows();
    require(dim >= 1 && params.q.cols() == dim, "Q must be square");
    require(params.b.rows() == dim && params.b.cols() == dim, "B must match the size of Q");
    require(params.b.allFinite(), "B must be finite");
    require(s_ > 0.0 && s_ <= 1.0, "fractional exponent must lie in (0, 1]");
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    require(rel_tol > 0.0, "tolerance must be positive");
    sqrt_q_ = spd_sqrt(params.q);
    b_ = params.b;
    drift_free_ = b_.isZero(0.0);
    if (drift_free_) {
        factors_ = {sqrt_q_};
        weights_ = {t_};
        return;
    }

    std::vector<Vector> probes;
    for (Eigen::Index k = 0; k < dim; ++k) probes.push_back(Vector::Unit(dim, k));
    probes.push_back(Vector::Ones(dim).normalized());
    if (dim > 1) {
        Vector alt = Vector::Ones(dim);
        for (Eigen::Index k = 1; k < dim; k += 2) alt(k) = -1.0;
        probes.push_back(alt.normalized());
    }

    std::size_t order = 8;
    build(order);
    std::vector<double> prev;
    for (const auto& p : probes) prev.push_back(exponent(p));
    for (order = 16; order <= 1024; order *= 2) {
        build(order);
        double worst = 0.0;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const double cur = exponent(probes[i]);
            worst = std::max(worst, std::abs(cur - prev[i]) / std::abs(cur));
            prev[i] = cur;
        }
        if (worst <= rel_tol) return;
    }
    throw NumericalFailure("Gauss-Legendre order for the OU-fractional symbol exceeded 1024");
}

void OUFracSymbol::build(std::size_t order) {
    const auto rule = quad::gauss_legendre(order);
    factors_.clear();
    weights_.clear();
    const Matrix bt = b_.transpose();
    for (std::size_t j = 0; j < order; ++j) {
        const double sigma = 0.5 * t_ * (1.0 + rule.nodes[j]);
        factors_.push_back(sqrt_q_ * matrix_exponential(-sigma * bt));
        weights_.push_back(0.5 * t_ * rule.weights[j]);
    }
}

double OUFracSymbol::exponent(const Vector& xi) const {
    require(xi.size() == sqrt_q_.rows(), "frequency dimension does not match Q");
    if (xi.isZero(0.0)) return 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < factors_.size(); ++j) {
        acc += weights_[j] * std::pow((factors_[j] * xi).squaredNorm(), s_);
    }
    return 0.5 * acc;
}

double OUFracSymbol::operator()(const Vector& xi) const { return std::exp(-exponent(xi)); }

double OUFracSymbol::rescaled(const Vector& xi) const { return std::exp(-exponent(xi) / t_); }

double ou_frac_symbol(const OUFracParams& params, double t, const Vector& xi) { return OUFracSymbol(params, t)(xi); }

// ---------------------------------------------------------------------------
// Gridded kernels

void KernelGrid::validate() const {
    require(dim == 1 || dim == 2, "gridded kernels support one or two dimensions");
    require(nodes >= 16 && (nodes & (nodes - 1)) == 0, "grid node count must be a power of two, at least 16");
    require(spacing > 0.0 && std::isfinite(spacing), "grid spacing must be positive");
}

double GriddedKernel::cell_volume() const { return std::pow(grid.spacing, grid.dim); }

double GriddedKernel::grad_l1(int axis) const {
    require(axis >= 0 && axis < grid.dim, "axis out of range");
    const auto& g = gradient.at(axis);
    require(!g.empty(), "gradient was not computed for this axis");
    std::vector<double> mags(g.size());
    std::transform(g.begin(), g.end(), mags.begin(), [](double v) { return std::abs(v); });
    return pairwise_sum(mags) * cell_volume();
}

KernelGrid choose_rescaled_grid(const OUFracSymbol& symbol, const GridPolicy& policy) {
    const int dim = symbol.dim();
    require(dim == 1 || dim == 2, "gridded kernels support one or two dimensions");
    const double s = symbol.s();
    // Along a unit direction u the rescaled symbol is exp(-E(u) ρ^{2s}).
    const int directions = dim == 1 ? 1 : 32;
    double xi_half_min = INFINITY, xi_half_max = 0.0, xi_cut_max = 0.0;
    for (int k = 0; k < directions; ++k) {
        Vector u(dim);
        if (dim == 1) {
            u(0) = 1.0;
        } else {
            const double a = pi * k / directions;
            u << std::cos(a), std::sin(a);
        }
        const double e = symbol.exponent(u) / symbol.time();
        const double half = std::pow(std::log(2.0) / e, 0.5 / s);
        const double cut = std::pow(-std::log(policy.symbol_floor) / e, 0.5 / s);
        xi_half_min = std::min(xi_half_min, half);
        xi_half_max = std::max(xi_half_max, half);
        xi_cut_max = std::max(xi_cut_max, cut);
    }
    // Half-widths lie between ln2/ξ_half (Cauchy-like) and 2 ln2/ξ_half (Gaussian).
    const double width_min = std::log(2.0) / xi_half_max;
    const double width_max = 2.0 * std::log(2.0) / xi_half_min;
    const double nyquist = pi / xi_cut_max;

    const double alias = dim == 1 ? policy.alias_target_1d : policy.alias_target_2d;
    const double widths = std::max(policy.min_half_widths, std::pow(alias, -1.0 / (dim + 2.0 * s)));
    double half_extent = std::max(policy.min_half_extent, widths * width_max);
    double h = std::min(width_min / policy.points_per_width, nyquist);
    const std::size_t cap = dim == 1 ? policy.max_nodes_1d : policy.max_nodes_2d;

    std::size_t n = next_pow2(2.0 * half_extent / h);
    if (n > cap) {
        n = cap;
        h = 2.0 * half_extent / static_cast<double>(n);
        if (h > nyquist) {
            h = nyquist;
            half_extent = 0.5 * static_cast<double>(n) * h;
            if (half_extent < policy.min_half_widths * width_max) {
                std::ostringstream msg;
                msg << "kernel grid cannot resolve both the symbol band and " << policy.min_half_widths
                    << " half-widths with " << cap << " nodes per axis (width " << width_max << ", Nyquist spacing "
                    << nyquist << ")";
                throw NumericalFailure(msg.str());
            }
        }
    } else {
        h = 2.0 * half_extent / static_cast<double>(n);
    }
    return KernelGrid{dim, n, h};
}

GriddedKernel ou_frac_kernel(const OUFracParams& params, double t, const KernelGrid& rescaled_grid, bool with_gradient) {
    const OUFracSymbol symbol(params, t);
    std::vector<int> axes;
    if (with_gradient) {
        for (int k = 0; k < symbol.dim(); ++k) axes.push_back(k);
    }
    return assemble(params, symbol, t, rescaled_grid, axes);
}

GriddedKernel ou_frac_kernel(const OUFracParams& params, double t, const GridPolicy& policy, bool with_gradient) {
    const OUFracSymbol symbol(params, t);
    std::vector<int> axes;
    if (with_gradient) {
        for (int k = 0; k < symbol.dim(); ++k) axes.push_back(k);
    }
    return assemble(params, symbol, t, choose_rescaled_grid(symbol, policy), axes);
}

GradL1Scaling ou_grad_l1_scaling_check(const OUFracParams& params, int axis, const std::vector<double>& times,
                                       const GridPolicy& policy) {
    require(times.size() >= 2, "at least two times are needed for a slope");
    require(axis >= 0 && axis < params.q.rows(), "axis out of range");
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    require(*lo > 0.0, "times must be positive");
    require(*hi >= 10.0 * *lo * (1.0 - 1e-12), "times must span at least one decade");

    GradL1Scaling out;
    out.times = times;
    out.norms = parallel_map(times.size(), [&](std::size_t i) {
        const OUFracSymbol symbol(params, times[i]);
        const auto k = assemble(params, symbol, times[i], choose_rescaled_grid(symbol, policy), {axis});
        return k.grad_l1(axis);
    });
    out.fit = fit_loglog(out.times, out.norms);
    return out;
}

void write_kernel_csv(const GriddedKernel& kernel, std::ostream& out, std::size_t stride) {
    require(stride >= 1, "stride must be positive");
    const auto& g = kernel.grid;
    const bool grad = std::any_of(kernel.gradient.begin(), kernel.gradient.end(), [](const auto& v) { return !v.empty(); });
    out.precision(17);
    if (g.dim == 1) {
        out << "x0,value";
    } else {
        out << "x0,x1,value";
    }
    if (grad) {
        for (int k = 0; k < g.dim; ++k) out << ",d" << k;
    }
    out << '\n';
    auto row = [&](std::size_t idx) {
        out << kernel.values[idx];
        if (grad) {
            for (int k = 0; k < g.dim; ++k) out << ',' << (kernel.gradient[k].empty() ? NAN : kernel.gradient[k][idx]);
        }
        out << '\n';
    };
    if (g.dim == 1) {
        for (std::size_t j = 0; j < g.nodes; j += stride) {
            out << g.coordinate(j) << ',';
            row(j);
        }
    } else {
        for (std::size_t i = 0; i < g.nodes; i += stride) {
            for (std::size_t j = 0; j < g.nodes; j += stride) {
                out << g.coordinate(i) << ',' << g.coordinate(j) << ',';
                row(i * g.nodes + j);
            }
        }
    }
}

nlohmann::json kernel_metadata(const GriddedKernel& kernel) {
    auto matrix_json = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json r = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
            rows.push_back(r);
        }
        return rows;
    };
    return {
        {"dim", kernel.grid.dim},
        {"s", kernel.s},
        {"t", kernel.t},
        {"Q", matrix_json(kernel.q)},
        {"B", matrix_json(kernel.b)},
        {"grid",
         {{"nodes_per_axis", kernel.grid.nodes},
          {"spacing", kernel.grid.spacing},
          {"extent", kernel.grid.extent()},
          {"origin", kernel.grid.coordinate(0)},
          {"rescaling", kernel.scale}}},
        {"normalization", kernel.normalization},
        {"peak", kernel.peak},
        {"min_value", kernel.min_value},
        {"imag_residue", kernel.imag_residue},
    };
}

}  // namespace mehler
