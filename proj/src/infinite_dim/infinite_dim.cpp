#include "mehler/infinite_dim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mehler/support/errors.hpp"
#include "mehler/support/montecarlo.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/quadrature.hpp"

namespace mehler {

namespace {

constexpr double pi = std::numbers::pi;
const double sqrt_2_over_pi = std::sqrt(2.0 / pi);

// Per-index sums of fill(stream, acc) over n draws in fixed batches on split streams.
template <class Fill>
std::vector<double> batched_sums(std::size_t n, std::uint64_t seed, std::uint64_t tag, std::size_t width, Fill fill,
                                 std::size_t batch = 4096) {
    const std::size_t batches = (n + batch - 1) / batch;
    const auto parts = parallel_map(batches, [&](std::size_t b) {
        RandomStream stream = RandomStream(seed, tag).split(b);
        std::vector<double> acc(width, 0.0);
        const std::size_t end = std::min(n, (b + 1) * batch);
        for (std::size_t i = b * batch; i < end; ++i) fill(stream, acc);
        return acc;
    });
    std::vector<double> out(width);
    std::vector<double> column(batches);
    for (std::size_t j = 0; j < width; ++j) {
        for (std::size_t b = 0; b < batches; ++b) column[b] = parts[b][j];
        out[j] = pairwise_sum(column);
    }
    return out;
}

Vector standard_normal(int dim, RandomStream& stream) {
    Vector z(dim);
    for (int i = 0; i < dim; ++i) z(i) = stream.normal();
    return z;
}

// ---------------------------------------------------------------------------
// Hermite test basis in whitened coordinates

class HermiteBasis {
public:
    HermiteBasis(int dim, int degree) : dim_(dim), degree_(degree) {
        std::vector<int> index(dim, 0);
        enumerate(index, 0, degree);
    }

    [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }

    // Values and ∂_w derivatives of every basis function at u.
    void evaluate(const Vector& u, const Vector& w, std::vector<double>& values, std::vector<double>& derivs) const {
        Matrix psi(dim_, degree_ + 1), dpsi(dim_, degree_ + 1);
        for (int i = 0; i < dim_; ++i) {
            psi(i, 0) = 1.0;
            dpsi(i, 0) = 0.0;
            if (degree_ >= 1) psi(i, 1) = u(i);
            for (int n = 1; n < degree_; ++n) {
                psi(i, n + 1) = (u(i) * psi(i, n) - std::sqrt(double(n)) * psi(i, n - 1)) / std::sqrt(double(n + 1));
            }
            for (int n = 1; n <= degree_; ++n) dpsi(i, n) = std::sqrt(double(n)) * psi(i, n - 1);
        }
        values.assign(size(), 0.0);
        derivs.assign(size(), 0.0);
        for (std::size_t k = 0; k < size(); ++k) {
            const auto& idx = indices_[k];
            double v = 1.0;
            for (int i = 0; i < dim_; ++i) v *= psi(i, idx[i]);
            double d = 0.0;
            for (int j = 0; j < dim_; ++j) {
                if (idx[j] == 0 || w(j) == 0.0) continue;
                double term = w(j) * dpsi(j, idx[j]);
                for (int i = 0; i < dim_; ++i) {
                    if (i != j) term *= psi(i, idx[i]);
                }
                d += term;
            }
            values[k] = v;
            derivs[k] = d;
        }
    }

private:
    void enumerate(std::vector<int>& index, int axis, int remaining) {
        if (axis == dim_) {
            indices_.push_back(index);
            return;
        }
        for (int n = 0; n <= remaining; ++n) {
            index[axis] = n;
            enumerate(index, axis + 1, remaining - n);
        }
        index[axis] = 0;
    }

    int dim_;
    int degree_;
    std::vector<std::vector<int>> indices_;
};

// ---------------------------------------------------------------------------
// Kato integral in u = ξ^s, split at u = λ with u = λ/v on the tail.

double kato_kernel(double s, double lambda, double u, KatoKernel kernel) {
    const double c = std::cos(s * pi);
    const double den = kernel == KatoKernel::corrected ? lambda * lambda + 2.0 * lambda * u * c + u * u
                                                       : lambda * lambda - 2.0 * u * c + u * u;
    if (!(den > 0.0)) throw NumericalFailure("Kato kernel denominator vanishes");
    return u / den;
}

void check_kato(double s, double lambda, KatoKernel kernel) {
    require(s > 0.0 && s < 1.0, "Kato exponent must lie in (0, 1)");
    require(lambda > 0.0 && std::isfinite(lambda), "λ must be positive");
    if (kernel == KatoKernel::as_printed) {
        const double c = std::cos(s * pi);
        require(!(c > 0.0 && lambda <= c), "printed Kato kernel has a pole for λ ≤ cos(sπ)");
    }
}

// ∫₀^∞ g(u) du for an integrand decaying like u^{-2}.
template <class G>
Estimate half_line(G&& g, double lambda, const quad::Options& opt) {
    const auto head = quad::integrate(g, 0.0, lambda, opt);
    const auto tail = quad::integrate([&](double v) { return g(lambda / v) * lambda / (v * v); }, 0.0, 1.0, opt);
    return {head.value + tail.value, head.error + tail.error};
}

}  // namespace

// ---------------------------------------------------------------------------
// Models

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::classical_ou: return "classical_ou";
        case ModelKind::smoothing_ou: return "smoothing_ou";
        case ModelKind::gross: return "gross";
        case ModelKind::gross_fractional: return "gross_fractional";
        case ModelKind::nongauss_p: return "nongauss_p";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
    for (auto k : {ModelKind::classical_ou, ModelKind::smoothing_ou, ModelKind::gross, ModelKind::gross_fractional,
                   ModelKind::nongauss_p}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidArgument("unknown model kind '" + name + "'");
}

ModelParams ModelParams::defaults(ModelKind kind) {
    ModelParams p;
    if (kind == ModelKind::smoothing_ou) {
        p.q_scale = 2.0;
        p.q_decay = 0.0;
    }
    return p;
}

SpectralModel build_model(ModelKind kind, int modes) { return build_model(kind, modes, ModelParams::defaults(kind)); }

SpectralModel build_model(ModelKind kind, int modes, const ModelParams& params) {
    require(modes >= 1, "truncation must keep at least one mode");
    SpectralModel m;
    m.kind_ = kind;
    m.modes_ = modes;
    m.params_ = params;
    m.q_.resize(modes);
    m.a_.resize(modes);

    const bool smoothing = kind == ModelKind::smoothing_ou;
    if (smoothing) require(params.drift_scale > 0.0 && std::isfinite(params.drift_scale), "drift scale must be positive");
    if (kind == ModelKind::gross_fractional) require(params.s > 0.0 && params.s < 1.0, "s must lie in (0, 1)");
    if (kind == ModelKind::nongauss_p) require(params.p > 0.0 && params.p <= 2.0, "p must lie in (0, 2]");

    for (int k = 1; k <= modes; ++k) {
        const double kk = k;
        switch (kind) {
            case ModelKind::smoothing_ou: m.a_(k - 1) = -params.drift_scale * kk * kk; break;
            case ModelKind::classical_ou:
            case ModelKind::nongauss_p: m.a_(k - 1) = -1.0; break;
            default: m.a_(k - 1) = 0.0;
        }
    }

    if (!params.covariance.empty()) {
        require(params.covariance.size() >= static_cast<std::size_t>(modes), "explicit covariance list is shorter than K");
        for (int k = 0; k < modes; ++k) {
            const double q = params.covariance[k];
            require(q > 0.0 && std::isfinite(q), "covariance eigenvalues must be positive and finite");
            m.q_(k) = q;
        }
        m.tail_ = 0.0;
    } else {
        require(params.q_scale > 0.0 && std::isfinite(params.q_scale), "covariance scale must be positive");
        require(params.q_decay >= 0.0 && std::isfinite(params.q_decay), "covariance decay must be non-negative");
        const double decay = params.q_decay + (smoothing ? 2.0 : 0.0);
        if (!(decay > 1.0)) throw InvalidArgument("covariance rule has divergent trace");
        const double lead = smoothing ? params.q_scale / (2.0 * params.drift_scale) : params.q_scale;
        for (int k = 1; k <= modes; ++k) m.q_(k - 1) = params.q_scale * std::pow(double(k), -params.q_decay);
        m.tail_ = lead * std::pow(double(modes), 1.0 - decay) / (decay - 1.0);
    }

    std::vector<double> trace_terms(modes);
    for (int k = 0; k < modes; ++k) trace_terms[k] = smoothing ? m.q_(k) / (-2.0 * m.a_(k)) : m.q_(k);
    m.trace_ = pairwise_sum(trace_terms);

    if (modes <= dense_mode_limit) {
        const Matrix q = m.q_.asDiagonal();
        MeasureFamily fam = [&] {
            switch (kind) {
                case ModelKind::classical_ou: return MeasureFamily::classical_ou(q);
                case ModelKind::smoothing_ou: return MeasureFamily::truncated_spectral(m.a_, m.q_);
                case ModelKind::gross: return MeasureFamily::gross_gaussian(q);
                case ModelKind::gross_fractional: return MeasureFamily::gross_mixture(q, params.s);
                case ModelKind::nongauss_p: return MeasureFamily::p_scaled(q, params.p);
            }
            throw InvalidArgument("unknown model kind");
        }();
        m.drift_ = std::make_shared<const DriftSemigroup>(fam.natural_drift());
        m.family_ = std::make_shared<const MeasureFamily>(std::move(fam));
    }
    return m;
}

Vector SpectralModel::covariance_at(double t) const {
    require(t >= 0.0 && std::isfinite(t), "time must be non-negative");
    switch (kind_) {
        case ModelKind::classical_ou: return -std::expm1(-2.0 * t) * q_;
        case ModelKind::smoothing_ou: {
            Vector c(modes_);
            for (int k = 0; k < modes_; ++k) c(k) = q_(k) * -std::expm1(2.0 * a_(k) * t) / (-2.0 * a_(k));
            return c;
        }
        case ModelKind::gross: return t * q_;
        case ModelKind::nongauss_p:
            if (params_.p == 2.0) return 0.5 * -std::expm1(-2.0 * t) * q_;
            break;
        default: break;
    }
    throw MethodUnavailable("model " + to_string(kind_) + " has no Gaussian covariance");
}

const MeasureFamily& SpectralModel::family() const {
    if (!family_) {
        throw InvalidArgument("truncation K = " + std::to_string(modes_) + " exceeds the dense limit " +
                              std::to_string(dense_mode_limit) + "; only spectral operations are available");
    }
    return *family_;
}

const DriftSemigroup& SpectralModel::drift() const {
    family();
    return *drift_;
}

HNormRule SpectralModel::h_norm() const {
    if (kind_ == ModelKind::smoothing_ou) return HNormRule::euclidean(modes_);
    return HNormRule::cameron_martin(q_.asDiagonal());
}

Vector SpectralModel::mode(int k) const {
    require(k >= 1 && k <= modes_, "mode index out of range");
    Vector e = Vector::Zero(modes_);
    e(k - 1) = 1.0;
    return e;
}

// ---------------------------------------------------------------------------
// Smoothing condition

SmoothingNorm smoothing_norm(const SpectralModel& model, double t) {
    require(model.kind() == ModelKind::smoothing_ou, "smoothing norm needs a smoothing_ou model");
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    SmoothingNorm out;
    for (int k = 0; k < model.modes(); ++k) {
        const double a = -model.eigenvalues()(k);
        const double x = a * t;
        const double v = std::sqrt(2.0 * a / model.covariance()(k)) * std::exp(-x) / std::sqrt(-std::expm1(-2.0 * x));
        if (v > out.value) {
            out.value = v;
            out.argmax = k + 1;
        }
    }
    out.at_truncation = model.modes() > 1 && out.argmax == model.modes();
    return out;
}

SmoothingFit smoothing_norm_slope(const SpectralModel& model, std::span<const double> times) {
    require(times.size() >= 2, "slope needs at least two times");
    SmoothingFit f;
    std::vector<double> values;
    for (double t : times) {
        f.times.push_back(t);
        f.norms.push_back(smoothing_norm(model, t));
        values.push_back(f.norms.back().value);
    }
    f.fit = fit_loglog(f.times, values);
    return f;
}

CameronMartinScaling cameron_martin_scaling(const SpectralModel& model, double t, const Vector& h, std::size_t samples,
                                            std::uint64_t seed) {
    require(model.kind() == ModelKind::classical_ou, "Cameron-Martin scaling needs a classical_ou model");
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    require(h.size() == model.modes() && h.norm() > 0.0, "direction must be a non-zero truncated vector");
    CameronMartinScaling out;
    const double h_norm = model.h_norm().norm(h);
    out.ratio_exact = 1.0 / std::sqrt(-std::expm1(-2.0 * t));
    const Matrix qt = model.covariance_at(t).asDiagonal();
    out.ratio_numeric = HNormRule::cameron_martin(qt).norm(h) / h_norm;
    out.beta_expected = sqrt_2_over_pi * std::exp(-t) * out.ratio_exact * h_norm;
    out.beta = fomin_l1_norm(model.family(), model.drift(), t, h, samples, seed);
    return out;
}

// ---------------------------------------------------------------------------
// Kato representation

Estimate kato_constant_integral(double s, double lambda, KatoKernel kernel) {
    check_kato(s, lambda, kernel);
    const double pre = std::sin(s * pi) / pi / s;
    auto g = [&](double u) { return pre * kato_kernel(s, lambda, u, kernel) / u; };
    quad::Options opt;
    opt.rel_tol = 1e-13;
    opt.abs_tol = 1e-15 / lambda;
    return half_line(g, lambda, opt);
}

Estimate kato_resolvent(const SpectralModel& model, double s, double lambda, const TestFunction& f, const Vector& x,
                        const KatoOptions& options) {
    require(model.kind() == ModelKind::gross || model.kind() == ModelKind::gross_fractional,
            "Kato representation needs a Gross model");
    check_kato(s, lambda, options.kernel);
    require(f.bounded(), "Kato representation needs a bounded function");
    require(f.dim() == model.modes() && x.size() == model.modes(), "function and point must match the truncation");
    model.family();
    const Matrix q = model.covariance().asDiagonal();
    const MeasureFamily gross = MeasureFamily::gross_gaussian(q);
    const DriftSemigroup drift = DriftSemigroup::identity(model.modes());
    const double bound = std::max(f.bound(), 1e-300);
    const double pre = std::sin(s * pi) / pi / s;

    double worst_relative = 0.0;
    auto g = [&](double u) {
        const double xi = std::pow(u, 1.0 / s);
        if (!(xi > 0.0) || !std::isfinite(xi)) return 0.0;
        ResolventOptions inner_opt = options.inner;
        inner_opt.t_min = std::min(inner_opt.t_min, 1e-3 / xi);
        const ResolventEvaluator inner(gross, drift, f, xi, inner_opt);
        const Estimate r = inner.value(x);
        worst_relative = std::max(worst_relative, r.error * xi / bound);
        // ξ^{s-1}·ξ^s dξ = (1/s) u^{1/s} du / u
        return pre * std::pow(u, 1.0 / s - 1.0) * r.value * kato_kernel(s, lambda, u, options.kernel);
    };
    quad::Options opt;
    opt.rel_tol = options.rel_tol;
    opt.abs_tol = 1e-12 * bound / lambda;
    Estimate out = half_line(g, lambda, opt);
    out.error += worst_relative * bound * kato_constant_integral(s, lambda, options.kernel).value;
    return out;
}

// ---------------------------------------------------------------------------
// Convolution Fomin lemma

ConvolutionPartner ConvolutionPartner::dirac(int dim) {
    require(dim >= 1, "dimension must be positive");
    ConvolutionPartner p;
    p.dim_ = dim;
    return p;
}

ConvolutionPartner ConvolutionPartner::gaussian(const Matrix& covariance) {
    require(covariance.rows() >= 1 && covariance.rows() == covariance.cols(), "covariance must be square");
    require(is_symmetric(covariance) && is_positive_definite(covariance), "covariance must be positive definite");
    ConvolutionPartner p;
    p.dim_ = static_cast<int>(covariance.rows());
    p.factor_ = Eigen::LLT<Matrix>(covariance).matrixL();
    return p;
}

ConvolutionPartner ConvolutionPartner::discrete(std::vector<Vector> atoms, std::vector<double> weights) {
    require(!atoms.empty(), "discrete measure needs at least one atom to be sampled");
    require(atoms.size() == weights.size(), "one weight per atom");
    const auto dim = atoms.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        require(atoms[i].size() == dim && atoms[i].allFinite(), "atoms must be finite vectors of equal dimension");
        require(weights[i] > 0.0 && std::isfinite(weights[i]), "weights must be positive");
        total += weights[i];
    }
    require(std::abs(total - 1.0) < 1e-12, "weights must sum to one");
    ConvolutionPartner p;
    p.dim_ = static_cast<int>(dim);
    p.atoms_ = std::move(atoms);
    std::partial_sum(weights.begin(), weights.end(), std::back_inserter(p.cumulative_));
    return p;
}

Vector ConvolutionPartner::sample(RandomStream& stream) const {
    if (factor_.size() > 0) return factor_ * standard_normal(dim_, stream);
    if (atoms_.empty()) return Vector::Zero(dim_);
    const double u = stream.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return atoms_[std::min<std::size_t>(it - cumulative_.begin(), atoms_.size() - 1)];
}

ConvolutionFominCheck convolution_fomin_check(const Matrix& covariance, const ConvolutionPartner& nu, const Vector& v,
                                              const ConvolutionFominOptions& options) {
    require(covariance.rows() >= 1 && covariance.rows() == covariance.cols(), "covariance must be square");
    require(is_symmetric(covariance) && is_positive_definite(covariance), "μ must be a non-degenerate Gaussian");
    const int dim = static_cast<int>(covariance.rows());
    require(nu.dim() == dim && v.size() == dim, "dimensions of μ, ν and v must agree");
    require(v.norm() > 0.0, "direction must be non-zero");
    require(options.degree >= 1 && options.degree <= 20, "Hermite degree must lie in [1, 20]");
    require(options.fit_samples >= 1000 && options.norm_samples >= 1000, "at least 1000 samples per pass");

    const Eigen::LLT<Matrix> mu(covariance);
    const Matrix mu_factor = mu.matrixL();
    ConvolutionFominCheck out;
    out.base = sqrt_2_over_pi * mu_factor.triangularView<Eigen::Lower>().solve(v).norm();

    auto draw = [&](RandomStream& stream) -> Vector { return mu_factor * standard_normal(dim, stream) + nu.sample(stream); };

    // Whitening from a pilot sample.
    const std::size_t pilot = std::min<std::size_t>(options.fit_samples, 50000);
    const auto moments = batched_sums(pilot, options.seed, 10, dim + dim * dim, [&](RandomStream& s, auto& acc) {
        const Vector z = draw(s);
        for (int i = 0; i < dim; ++i) acc[i] += z(i);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) acc[dim + i * dim + j] += z(i) * z(j);
    });
    Vector mean(dim);
    Matrix cov(dim, dim);
    for (int i = 0; i < dim; ++i) mean(i) = moments[i] / double(pilot);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) cov(i, j) = moments[dim + i * dim + j] / double(pilot) - mean(i) * mean(j);
    const Eigen::LLT<Matrix> whitening(cov);
    if (whitening.info() != Eigen::Success) throw NumericalFailure("sample covariance of μ∗ν is singular");
    const Matrix white_l = whitening.matrixL();
    const Vector w = white_l.triangularView<Eigen::Lower>().solve(v);
    auto whiten = [&](const Vector& z) -> Vector { return white_l.triangularView<Eigen::Lower>().solve(z - mean); };

    const HermiteBasis basis(dim, options.degree);
    const std::size_t p = basis.size();
    out.basis_size = p;

    // Gram matrix E[φ_iφ_j] and moments E[∂_vφ_i].
    const auto sums = batched_sums(options.fit_samples, options.seed, 11, p * p + p, [&](RandomStream& s, auto& acc) {
        std::vector<double> val, der;
        basis.evaluate(whiten(draw(s)), w, val, der);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) acc[i * p + j] += val[i] * val[j];
            acc[p * p + i] += der[i];
        }
    });
    Matrix gram(p, p);
    Vector moment(p);
    const double n_fit = static_cast<double>(options.fit_samples);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) gram(i, j) = sums[i * p + j] / n_fit;
        moment(i) = sums[p * p + i] / n_fit;
    }
    const Eigen::LDLT<Matrix> solver(gram);
    if (solver.info() != Eigen::Success) throw NumericalFailure("Hermite Gram matrix is singular");
    const Vector coeff = -solver.solve(moment);

    auto beta_hat = [&](const Vector& z, std::vector<double>& val, std::vector<double>& der) {
        basis.evaluate(whiten(z), w, val, der);
        double b = 0.0;
        for (std::size_t i = 0; i < p; ++i) b += coeff(i) * val[i];
        return b;
    };

    out.convolution = monte_carlo_mean(options.norm_samples, options.seed, 12, [&](RandomStream& s) {
        std::vector<double> val, der;
        return std::abs(beta_hat(draw(s), val, der));
    });

    const auto residual = batched_sums(options.norm_samples, options.seed, 13, 2 * p, [&](RandomStream& s, auto& acc) {
        std::vector<double> val, der;
        const double b = beta_hat(draw(s), val, der);
        for (std::size_t i = 0; i < p; ++i) {
            const double r = der[i] + b * val[i];
            acc[2 * i] += r;
            acc[2 * i + 1] += r * r;
        }
    });
    const double n_norm = static_cast<double>(options.norm_samples);
    for (std::size_t i = 0; i < p; ++i) {
        const double mean = residual[2 * i] / n_norm;
        const double se = std::sqrt(std::max(0.0, residual[2 * i + 1] / n_norm - mean * mean) / (n_norm - 1.0));
        if (se > 0.0) out.ibp_z_score = std::max(out.ibp_z_score, std::abs(mean) / se);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rescaled measures

FominMeasure::FominMeasure(const Matrix& covariance, const Vector& shift) : cov_(covariance), shift_(shift) {
    require(covariance.rows() >= 1 && covariance.rows() == covariance.cols(), "covariance must be square");
    require(is_symmetric(covariance) && is_positive_definite(covariance), "covariance must be positive definite");
    require(shift.size() == covariance.rows() && shift.allFinite(), "shift must match the covariance");
    chol_.compute(cov_);
    factor_ = chol_.matrixL();
}

Vector FominMeasure::sample(RandomStream& stream) const {
    Vector y = factor_ * standard_normal(dim(), stream);
    if (shift_.squaredNorm() > 0.0) y += stream.uniform() < 0.5 ? shift_ : Vector(-shift_);
    return y;
}

double FominMeasure::beta(const Vector& h, const Vector& y) const {
    require(h.size() == dim() && y.size() == dim(), "dimension mismatch");
    const Vector ch = chol_.solve(h);
    double b = -ch.dot(y);
    if (shift_.squaredNorm() > 0.0) b += ch.dot(shift_) * std::tanh(chol_.solve(shift_).dot(y));
    return b;
}

FominMeasure FominMeasure::scaled(double c) const {
    require(c > 0.0 && std::isfinite(c), "scale must be positive");
    return FominMeasure(c * c * cov_, c * shift_);
}

RescaledBetaCheck rescaled_beta_check(const FominMeasure& nu, double c, const Vector& h, std::size_t samples,
                                      std::uint64_t seed) {
    require(samples >= 1000, "at least 1000 samples");
    require(h.size() == nu.dim() && h.norm() > 0.0, "direction must be non-zero and match the measure");
    const FominMeasure nu_c = nu.scaled(c);
    RescaledBetaCheck out;

    const std::size_t pointwise_n = std::min<std::size_t>(samples, 10000);
    RandomStream stream(seed, 20);
    for (std::size_t i = 0; i < pointwise_n; ++i) {
        const Vector y = nu_c.sample(stream);
        const double lhs = nu_c.beta(h, y);
        const double rhs = nu.beta(h, y / c) / c;
        out.pointwise = std::max(out.pointwise, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    out.scaled_norm = monte_carlo_mean(samples, seed, 21, [&](RandomStream& s) { return std::abs(nu_c.beta(h, nu_c.sample(s))); });
    out.base_norm = monte_carlo_mean(samples, seed, 22, [&](RandomStream& s) { return std::abs(nu.beta(h, nu.sample(s))); });
    out.ratio = out.scaled_norm.value / out.base_norm.value;
    out.ratio_error = out.ratio * std::hypot(out.scaled_norm.error / out.scaled_norm.value,
                                             out.base_norm.error / out.base_norm.value);
    return out;
}

std::vector<CharacteristicProbe> mixture_characteristic_check(const MeasureFamily& family, double t,
                                                              std::span<const Vector> frequencies, std::size_t samples,
                                                              std::uint64_t seed) {
    require(t > 0.0 && std::isfinite(t), "time must be positive");
    require(samples >= 1000, "at least 1000 samples");
    require(!frequencies.empty(), "at least one probe frequency");
    for (const auto& a : frequencies) require(a.size() == family.dim(), "frequency dimension mismatch");
    const LawAtTime law = family.law(t);
    const LawSampler sampler(law);
    const std::size_t m = frequencies.size();
    const auto sums = batched_sums(samples, seed, 30, 3 * m, [&](RandomStream& s, auto& acc) {
        const Vector y = sampler(s).y;
        for (std::size_t j = 0; j < m; ++j) {
            const double phase = frequencies[j].dot(y);
            const double c = std::cos(phase);
            acc[3 * j] += c;
            acc[3 * j + 1] += c * c;
            acc[3 * j + 2] += std::sin(phase);
        }
    });
    const double n = static_cast<double>(samples);
    std::vector<CharacteristicProbe> out;
    for (std::size_t j = 0; j < m; ++j) {
        CharacteristicProbe p;
        p.frequency = frequencies[j];
        p.expected = std::exp(-law.log_char(frequencies[j]));
        const double mean = sums[3 * j] / n;
        const double var = std::max(0.0, sums[3 * j + 1] / n - mean * mean) * n / (n - 1.0);
        p.empirical = {mean, std::sqrt(var / n)};
        p.imaginary = sums[3 * j + 2] / n;
        p.z_score = p.empirical.error > 0.0 ? (mean - p.expected) / p.empirical.error : 0.0;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mehler
