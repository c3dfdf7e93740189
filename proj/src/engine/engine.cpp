#include "mehler/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "mehler/kernels.hpp"
#include "mehler/subordinator.hpp"
#include "mehler/support/errors.hpp"
#include "mehler/support/montecarlo.hpp"
#include "mehler/support/parallel.hpp"
#include "mehler/support/quadrature.hpp"

namespace mehler {

namespace {

constexpr double pi = std::numbers::pi;

void check_time(double t, bool derivative) {
    require(std::isfinite(t) && t >= 0.0, "time must be finite and non-negative");
    if (derivative) require(t >= min_derivative_time, "derivative operations need t >= 1e-6");
}

void check_vector(const Vector& v, int dim, const char* what) {
    require(v.size() == dim, std::string(what) + " dimension does not match the family");
    require(v.allFinite(), std::string(what) + " must be finite");
}

// Probabilists' Hermite polynomial He_n.
double hermite(int n, double z) {
    double h0 = 1.0, h1 = z;
    if (n == 0) return h0;
    for (int k = 1; k < n; ++k) {
        const double h2 = z * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// E exp(-S q) for S ~ η⁽ˢ⁾_τ, by quadrature of the tabulated density in log σ.
Estimate subordinated_laplace(double s, double tau, double q, double rel_tol) {
    if (q == 0.0) return {1.0, 0.0};
    auto table = SubordinatorTable::get(s);
    const double scale = std::pow(tau, 1.0 / s);
    auto integrand = [&](double log_sigma) {
        const double sigma = std::exp(log_sigma);
        const double e = table->density_scaled(tau, sigma);
        if (e <= 0.0) return 0.0;
        return std::exp(log_sigma - sigma * q) * e;
    };
    const double mode = std::log(scale);
    const double lo = std::log(table->support_left() * scale);
    const double cut = std::log(745.0 / q);
    const double hi = std::min(mode + 40.0 / s, cut);
    if (!(hi > lo)) return {0.0, 0.0};
    std::vector<double> pts{lo, hi};
    for (double p : {mode - 2.0, mode, mode + 2.0, -std::log(q)}) {
        if (p > lo && p < hi) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    quad::Options opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = 1e-16;
    const auto r = quad::integrate(integrand, std::span<const double>(pts), opt);
    // The tabulated density carries its own interpolation budget.
    return {r.value, r.error + SubordinatorQuadrature{}.table_tol * r.l1};
}

// Per-component data for sampling and conditional Fomin weights.
struct ComponentModel {
    LawComponent component;
    Matrix gram;  // factor factorᵀ
    std::optional<SubordinatorDensity> subordinator;
};

struct LayerModel {
    LawAtTime law;
    std::vector<ComponentModel> parts;

    explicit LayerModel(LawAtTime l) : law(std::move(l)) {
        for (const auto& c : law.components) {
            ComponentModel m{c, c.factor * c.factor.transpose(), std::nullopt};
            if (c.mixed()) m.subordinator.emplace(c.s);
            parts.push_back(std::move(m));
        }
    }

    void sample(RandomStream& stream, Vector& y, std::vector<double>& scales) const {
        y.setZero(law.dim);
        scales.resize(parts.size());
        Vector z(law.dim);
        for (std::size_t j = 0; j < parts.size(); ++j) {
            const auto& c = parts[j];
            const double sj = c.subordinator ? c.subordinator->sample(c.component.tau, stream) : c.component.tau;
            scales[j] = sj;
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = stream.normal();
            y.noalias() += std::sqrt(sj) * (c.component.factor * z);
        }
    }
};

// ⟨C⁻¹v, y⟩ with C = Σ S_j factor_j factor_jᵀ; single-component laws reuse one factorization.
class FominWeight {
public:
    FominWeight(const LayerModel& layer, const Vector& v) : layer_(layer), v_(v) {
        if (layer.parts.size() == 1) {
            Eigen::LLT<Matrix> llt(layer.parts[0].gram);
            if (llt.info() != Eigen::Success) {
                throw InvalidArgument("direction lies outside the Cameron-Martin space of the layer law");
            }
            single_ = llt.solve(v);
        }
    }

    [[nodiscard]] double operator()(const Vector& y, const std::vector<double>& scales) const {
        if (single_) return single_->dot(y) / scales[0];
        Matrix c = Matrix::Zero(v_.size(), v_.size());
        for (std::size_t j = 0; j < scales.size(); ++j) c += scales[j] * layer_.parts[j].gram;
        Eigen::LLT<Matrix> llt(c);
        if (llt.info() != Eigen::Success) throw NumericalFailure("conditional covariance is not positive definite");
        return llt.solve(v_).dot(y);
    }

private:
    const LayerModel& layer_;
    Vector v_;
    std::optional<Vector> single_;
};

constexpr std::uint64_t tag_value = 1, tag_derivative = 2, tag_nth = 3, tag_lhs = 4, tag_rhs = 5, tag_fomin = 6;

}  // namespace

// ---------------------------------------------------------------------------
// Drift

DriftSemigroup DriftSemigroup::identity(int dim) {
    require(dim >= 1, "dimension must be positive");
    DriftSemigroup d;
    d.kind_ = Kind::identity;
    d.dim_ = dim;
    return d;
}

DriftSemigroup DriftSemigroup::scalar_decay(int dim, double rate) {
    require(dim >= 1, "dimension must be positive");
    require(std::isfinite(rate), "decay rate must be finite");
    DriftSemigroup d;
    d.kind_ = Kind::scalar_decay;
    d.dim_ = dim;
    d.rate_ = rate;
    d.omega_ = -rate;
    return d;
}

DriftSemigroup DriftSemigroup::matrix_exp(const Matrix& b) {
    require(b.rows() >= 1 && b.rows() == b.cols(), "drift matrix must be square");
    require(b.allFinite(), "drift matrix must be finite");
    DriftSemigroup d;
    d.kind_ = Kind::matrix_exp;
    d.dim_ = static_cast<int>(b.rows());
    d.b_ = b;
    // ‖e^{-tB}‖ ≤ e^{μ t} with μ the logarithmic norm of -B.
    const Matrix sym = -0.5 * (b + b.transpose());
    d.omega_ = Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues().maxCoeff();
    return d;
}

DriftSemigroup DriftSemigroup::spectral_diag(const Vector& eigenvalues) {
    require(eigenvalues.size() >= 1 && eigenvalues.allFinite(), "eigenvalues must be finite");
    DriftSemigroup d;
    d.kind_ = Kind::spectral_diag;
    d.dim_ = static_cast<int>(eigenvalues.size());
    d.eigen_ = eigenvalues;
    d.omega_ = eigenvalues.maxCoeff();
    return d;
}

std::string DriftSemigroup::name() const {
    switch (kind_) {
        case Kind::identity: return "identity";
        case Kind::scalar_decay: return "scalar_decay";
        case Kind::matrix_exp: return "matrix_exp";
        case Kind::spectral_diag: return "spectral_diag";
    }
    return "unknown";
}

Vector DriftSemigroup::apply(double t, const Vector& x) const {
    require(x.size() == dim_, "point dimension does not match the drift");
    switch (kind_) {
        case Kind::identity: return x;
        case Kind::scalar_decay: return std::exp(-rate_ * t) * x;
        case Kind::matrix_exp: return matrix_exponential(-t * b_) * x;
        case Kind::spectral_diag: return (eigen_ * t).array().exp().matrix().cwiseProduct(x);
    }
    return x;
}

Matrix DriftSemigroup::matrix(double t) const {
    switch (kind_) {
        case Kind::identity: return Matrix::Identity(dim_, dim_);
        case Kind::scalar_decay: return std::exp(-rate_ * t) * Matrix::Identity(dim_, dim_);
        case Kind::matrix_exp: return matrix_exponential(-t * b_);
        case Kind::spectral_diag: return (eigen_ * t).array().exp().matrix().asDiagonal();
    }
    return Matrix::Identity(dim_, dim_);
}

double DriftSemigroup::composition_residual(double t, double s, std::span<const Vector> probes) const {
    double worst = 0.0;
    for (const auto& x : probes) {
        const Vector direct = apply(t + s, x);
        const Vector composed = apply(t, apply(s, x));
        worst = std::max(worst, (direct - composed).norm() / std::max(x.norm(), 1e-300));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// H-norm

HNormRule HNormRule::euclidean(int dim) {
    require(dim >= 1, "dimension must be positive");
    HNormRule r;
    r.dim_ = dim;
    return r;
}

HNormRule HNormRule::cameron_martin(const Matrix& q) {
    require(q.rows() >= 1 && q.rows() == q.cols(), "covariance must be square");
    require(is_symmetric(q) && is_positive_definite(q), "covariance must be symmetric positive definite");
    HNormRule r;
    r.euclidean_ = false;
    r.dim_ = static_cast<int>(q.rows());
    r.q_ = q;
    r.chol_.compute(q);
    return r;
}

double HNormRule::norm(const Vector& h) const {
    require(h.size() == dim_, "direction dimension does not match the H-norm");
    if (euclidean_) return h.norm();
    return chol_.matrixL().solve(h).norm();
}

double HNormRule::dual_norm(const Vector& g) const {
    require(g.size() == dim_, "covector dimension does not match the H-norm");
    if (euclidean_) return g.norm();
    return (chol_.matrixL().transpose() * g).norm();
}

std::vector<Vector> HNormRule::unit_directions() const {
    std::vector<Vector> out;
    if (euclidean_) {
        for (int k = 0; k < dim_; ++k) out.push_back(Vector::Unit(dim_, k));
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(q_);
    for (int k = dim_ - 1; k >= 0; --k) out.push_back(std::sqrt(es.eigenvalues()(k)) * es.eigenvectors().col(k));
    return out;
}

// ---------------------------------------------------------------------------
// Laws

double LawComponent::log_char(const Vector& xi) const {
    const double q = 0.5 * (factor.transpose() * xi).squaredNorm();
    return tau * std::pow(q, s);
}

bool LawAtTime::gaussian() const noexcept {
    return std::all_of(components.begin(), components.end(), [](const auto& c) { return !c.mixed(); });
}

Matrix LawAtTime::covariance() const {
    if (!gaussian()) throw MethodUnavailable("mixture laws have no Gaussian covariance");
    Matrix c = Matrix::Zero(dim, dim);
    for (const auto& comp : components) c += comp.tau * comp.factor * comp.factor.transpose();
    return c;
}

double LawAtTime::log_char(const Vector& xi) const {
    double acc = 0.0;
    for (const auto& c : components) acc += c.log_char(xi);
    return acc;
}

LawSample sample_law(const LawAtTime& law, RandomStream& stream) {
    LayerModel layer(law);
    LawSample out;
    layer.sample(stream, out.y, out.scales);
    return out;
}

struct LawSampler::Impl {
    LayerModel layer;
};

LawSampler::LawSampler(const LawAtTime& law) : impl_(std::make_unique<Impl>(Impl{LayerModel(law)})) {}
LawSampler::~LawSampler() = default;
LawSampler::LawSampler(LawSampler&&) noexcept = default;

LawSample LawSampler::operator()(RandomStream& stream) const {
    LawSample out;
    impl_->layer.sample(stream, out.y, out.scales);
    return out;
}

// ---------------------------------------------------------------------------
// Families

namespace {

Matrix checked_covariance(const Matrix& q) {
    require(q.rows() >= 1 && q.rows() == q.cols(), "covariance must be square");
    return spd_sqrt(q);
}

void check_exponent(double s) { require(s > 0.0 && s < 1.0, "fractional exponent must lie in (0, 1)"); }

}  // namespace

MeasureFamily MeasureFamily::gaussian_heat(int dim) {
    require(dim >= 1, "dimension must be positive");
    MeasureFamily f;
    f.kind_ = Kind::gaussian_heat;
    f.dim_ = dim;
    f.q_ = 2.0 * Matrix::Identity(dim, dim);
    f.sqrt_q_ = std::sqrt(2.0) * Matrix::Identity(dim, dim);
    return f;
}

MeasureFamily MeasureFamily::fractional_heat(int dim, double s) {
    check_exponent(s);
    MeasureFamily f = gaussian_heat(dim);
    f.kind_ = Kind::fractional_heat;
    f.s_ = s;
    return f;
}

MeasureFamily MeasureFamily::ou_fractional(const Matrix& q, const Matrix& b, double s) {
    require(s > 0.0 && s <= 1.0, "fractional exponent must lie in (0, 1]");
    MeasureFamily f;
    f.kind_ = Kind::ou_fractional;
    f.sqrt_q_ = checked_covariance(q);
    f.dim_ = static_cast<int>(q.rows());
    require(b.rows() == q.rows() && b.cols() == q.cols() && b.allFinite(), "B must be a finite matrix matching Q");
    f.q_ = q;
    f.b_ = b;
    f.s_ = s;
    return f;
}

MeasureFamily MeasureFamily::classical_ou(const Matrix& q) {
    MeasureFamily f;
    f.kind_ = Kind::classical_ou;
    f.sqrt_q_ = checked_covariance(q);
    f.dim_ = static_cast<int>(q.rows());
    f.q_ = q;
    return f;
}

MeasureFamily MeasureFamily::gross_gaussian(const Matrix& q) {
    MeasureFamily f = classical_ou(q);
    f.kind_ = Kind::gross_gaussian;
    return f;
}

MeasureFamily MeasureFamily::gross_mixture(const Matrix& q, double s) {
    check_exponent(s);
    MeasureFamily f = classical_ou(q);
    f.kind_ = Kind::gross_mixture;
    f.s_ = s;
    return f;
}

MeasureFamily MeasureFamily::p_scaled(const Matrix& q, double p) {
    require(p > 0.0 && p <= 2.0, "p must lie in (0, 2]");
    MeasureFamily f = classical_ou(q);
    f.kind_ = Kind::p_scaled;
    f.p_ = p;
    f.s_ = 0.5 * p;
    return f;
}

MeasureFamily MeasureFamily::truncated_spectral(const Vector& drift_eigenvalues, const Vector& covariance) {
    require(drift_eigenvalues.size() >= 1 && drift_eigenvalues.size() == covariance.size(),
            "eigenvalue and covariance sequences must have equal positive length");
    require((drift_eigenvalues.array() < 0.0).all(), "drift eigenvalues must be negative");
    require((covariance.array() > 0.0).all() && covariance.allFinite(), "covariance eigenvalues must be positive");
    MeasureFamily f;
    f.kind_ = Kind::truncated_spectral;
    f.dim_ = static_cast<int>(covariance.size());
    f.q_ = covariance.asDiagonal();
    f.sqrt_q_ = covariance.cwiseSqrt().asDiagonal();
    f.eigen_ = drift_eigenvalues;
    return f;
}

std::string MeasureFamily::name() const {
    switch (kind_) {
        case Kind::gaussian_heat: return "gaussian_heat";
        case Kind::fractional_heat: return "fractional_heat";
        case Kind::ou_fractional: return "ou_fractional";
        case Kind::classical_ou: return "classical_ou";
        case Kind::gross_gaussian: return "gross_gaussian";
        case Kind::gross_mixture: return "gross_mixture";
        case Kind::p_scaled: return "p_scaled";
        case Kind::truncated_spectral: return "truncated_spectral";
    }
    return "unknown";
}

double MeasureFamily::theta() const noexcept {
    switch (kind_) {
        case Kind::fractional_heat:
        case Kind::gross_mixture:
        case Kind::ou_fractional: return 0.5 / s_;
        case Kind::p_scaled: return 1.0 / p_;
        default: return 0.5;
    }
}

bool MeasureFamily::mixture() const noexcept {
    switch (kind_) {
        case Kind::fractional_heat:
        case Kind::gross_mixture: return true;
        case Kind::ou_fractional: return s_ < 1.0;
        case Kind::p_scaled: return p_ < 2.0;
        default: return false;
    }
}

LawAtTime MeasureFamily::law(double t) const {
    check_time(t, false);
    LawAtTime law;
    law.dim = dim_;
    if (t == 0.0) return law;
    switch (kind_) {
        case Kind::gaussian_heat: law.components.push_back({sqrt_q_, 1.0, t}); break;
        case Kind::fractional_heat:
        case Kind::gross_mixture: law.components.push_back({sqrt_q_, s_, t}); break;
        case Kind::classical_ou: law.components.push_back({sqrt_q_, 1.0, -std::expm1(-2.0 * t)}); break;
        case Kind::gross_gaussian: law.components.push_back({sqrt_q_, 1.0, t}); break;
        case Kind::p_scaled: {
            const double c = std::pow(-std::expm1(-p_ * t), 1.0 / p_);
            if (p_ == 2.0) {
                law.components.push_back({c * sqrt_q_, 1.0, 0.5});
            } else {
                law.components.push_back({c * sqrt_q_, s_, 1.0 / p_});
            }
            break;
        }
        case Kind::truncated_spectral: {
            Vector var(dim_);
            for (int k = 0; k < dim_; ++k) var(k) = q_(k, k) * (-std::expm1(2.0 * eigen_(k) * t)) / (-2.0 * eigen_(k));
            law.components.push_back({Matrix(var.cwiseSqrt().asDiagonal()), 1.0, 1.0});
            break;
        }
        case Kind::ou_fractional: {
            // Each σ-node of the symbol rule contributes an independent
            // subordinated Gaussian; the characteristic function of the sum
            // equals the quadrature of the symbol exponent.
            const double c = std::sqrt(std::pow(2.0, 1.0 - 1.0 / s_));
            if (b_.isZero(0.0)) {
                law.components.push_back({c * sqrt_q_, s_, t});
                break;
            }
            const OUFracSymbol symbol(OUFracParams{q_, b_, s_}, t);
            for (std::size_t j = 0; j < symbol.order(); ++j) {
                law.components.push_back({c * symbol.factors()[j].transpose(), s_, symbol.weights()[j]});
            }
            break;
        }
    }
    return law;
}

DriftSemigroup MeasureFamily::natural_drift() const {
    switch (kind_) {
        case Kind::classical_ou:
        case Kind::p_scaled: return DriftSemigroup::scalar_decay(dim_, 1.0);
        case Kind::ou_fractional: return DriftSemigroup::matrix_exp(b_);
        case Kind::truncated_spectral: return DriftSemigroup::spectral_diag(eigen_);
        default: return DriftSemigroup::identity(dim_);
    }
}

HNormRule MeasureFamily::h_norm() const {
    switch (kind_) {
        case Kind::classical_ou:
        case Kind::gross_gaussian:
        case Kind::gross_mixture:
        case Kind::p_scaled: return HNormRule::cameron_martin(q_);
        default: return HNormRule::euclidean(dim_);
    }
}

// ---------------------------------------------------------------------------
// Evaluator

struct SemigroupEvaluator::Impl {
    MeasureFamily family;
    DriftSemigroup drift;
    TestFunction f;
    double t;
    MethodSpec method;
    int max_order;
    Matrix drift_t;
    // layers[n-1] is the law of μ_{t/n}
    std::vector<LayerModel> layers;
    // Trigonometric multipliers per order: χ_k^{(n)} with error.
    std::vector<std::vector<Estimate>> multipliers;

    Impl(const MeasureFamily& fam, const DriftSemigroup& dr, TestFunction fn, double time, MethodSpec m, int order)
        : family(fam), drift(dr), f(std::move(fn)), t(time), method(m), max_order(order) {
        require(drift.dim() == family.dim(), "drift and family dimensions differ");
        require(f.dim() == family.dim(), "function and family dimensions differ");
        require(max_order >= 1 && max_order <= 3, "derivative order must lie in [1, 3]");
        check_time(t, false);
        require(method.kind == Method::quadrature || method.samples >= 2, "Monte Carlo needs at least two samples");
        drift_t = drift.matrix(t);
        if (t == 0.0) return;
        for (int n = 1; n <= max_order; ++n) layers.emplace_back(family.law(t / n));
        if (method.kind == Method::quadrature && f.spectrum() != nullptr) prepare_trig();
    }

    double tol() const { return method.rel_tol > 0.0 ? method.rel_tol : 1e-10; }

    // χ of one layer law at frequency ξ by quadrature over each subordinator.
    Estimate layer_multiplier(const LawAtTime& law, const Vector& xi) const {
        double value = 1.0, rel_err = 0.0;
        for (const auto& c : law.components) {
            const double q = 0.5 * (c.factor.transpose() * xi).squaredNorm();
            if (!c.mixed()) {
                value *= std::exp(-c.tau * q);
                continue;
            }
            const Estimate l = subordinated_laplace(c.s, c.tau, q, 0.1 * tol());
            value *= l.value;
            rel_err += l.value > 0.0 ? l.error / l.value : 0.0;
        }
        return {value, std::abs(value) * rel_err};
    }

    void prepare_trig() {
        const auto& terms = f.spectrum()->terms;
        multipliers.resize(max_order);
        for (int n = 1; n <= max_order; ++n) {
            const double tau = t / n;
            const Matrix step = drift.matrix(tau);
            multipliers[n - 1] = parallel_map(terms.size(), [&](std::size_t k) {
                // Layer j sees the frequency (T_τ^{n-j})ᵀ ξ.
                double value = 1.0, err = 0.0;
                Vector xi = terms[k].frequency;
                for (int j = n; j >= 1; --j) {
                    const Estimate m = layer_multiplier(layers[n - 1].law, xi);
                    err = std::abs(value) * m.error + std::abs(m.value) * err;
                    value *= m.value;
                    xi = step.transpose() * xi;
                }
                return Estimate{value, err};
            });
        }
    }

    // ---- trigonometric path
    Estimate trig(const Vector& x, std::span<const Vector> hs) const {
        const auto* spec = f.spectrum();
        const int n = static_cast<int>(hs.size());
        const Vector a = drift_t * x;
        std::vector<Vector> v;
        for (const auto& h : hs) v.push_back(drift_t * h);
        double value = n == 0 ? spec->constant : 0.0;
        double err = 0.0;
        const auto& mult = multipliers[std::max(n, 1) - 1];
        for (std::size_t k = 0; k < spec->terms.size(); ++k) {
            const auto& term = spec->terms[k];
            double factor = term.amplitude * std::cos(term.frequency.dot(a) + term.phase + 0.5 * pi * n);
            for (const auto& vj : v) factor *= term.frequency.dot(vj);
            value += factor * mult[k].value;
            err += std::abs(factor) * mult[k].error;
        }
        return {value, err};
    }

    // ---- ridge path
    // ∫ f(a + sd·z) He_n(z) φ(z) dz
    Estimate gaussian_layer(const Ridge& ridge, double a, double sd, int n) const {
        const double zmax = 12.0;
        auto integrand = [&](double z) {
            return ridge.profile->value(a + sd * z) * hermite(n, z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
        };
        std::vector<double> pts{-zmax, -3.0, -1.0, 0.0, 1.0, 3.0, zmax};
        for (double b : ridge.profile->breakpoints()) {
            const double z = (b - a) / sd;
            if (z > -zmax && z < zmax) pts.push_back(z);
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        quad::Options opt;
        opt.rel_tol = 0.1 * tol();
        opt.l1_tol = 1e-13;
        opt.abs_tol = f.bounded() ? 1e-15 * f.bound() : 0.0;
        opt.max_intervals = 20000;
        const auto r = quad::integrate(integrand, std::span<const double>(pts), opt);
        return {r.value, r.error};
    }

    Estimate ridge(const Vector& x, std::span<const Vector> hs) const {
        const Ridge& r = *f.ridge();
        const int n = static_cast<int>(hs.size());
        const LayerModel& layer = layers[std::max(n, 1) - 1];
        if (layer.law.components.size() != 1) {
            throw MethodUnavailable("quadrature for ridge functions needs a single-component law; use monte_carlo");
        }
        const double a = r.direction.dot(drift_t * x);
        double coeff = 1.0;
        for (const auto& h : hs) coeff *= r.direction.dot(drift_t * h);
        const LawComponent& comp = layer.law.components[0];

        if (!comp.mixed()) {
            // Sum of the n equipartition layers projected on the ridge direction.
            double var = 0.0;
            const int layers_n = std::max(n, 1);
            const Matrix step = drift.matrix(t / layers_n);
            Vector w = r.direction;
            const Matrix cov = comp.tau * comp.factor * comp.factor.transpose();
            for (int j = layers_n; j >= 1; --j) {
                var += w.dot(cov * w);
                w = step.transpose() * w;
            }
            const double sd = std::sqrt(var);
            if (!(sd > 0.0)) throw InvalidArgument("law is degenerate along the ridge direction");
            const Estimate inner = gaussian_layer(r, a, sd, n);
            const double scale = coeff * std::pow(sd, -n);
            return {scale * inner.value, std::abs(scale) * inner.error};
        }

        if (n > 1) throw MethodUnavailable("higher derivatives of ridge functions under mixture laws need monte_carlo");
        if (!f.bounded()) throw InvalidArgument("heavy-tailed laws need a bounded function");
        const double rho = (comp.factor.transpose() * r.direction).norm();
        if (!(rho > 0.0)) throw InvalidArgument("law is degenerate along the ridge direction");
        auto table = SubordinatorTable::get(comp.s);
        const double scale = std::pow(comp.tau, 1.0 / comp.s);
        double inner_err = 0.0;
        auto outer = [&](double log_sigma) {
            const double sigma = std::exp(log_sigma);
            const double e = table->density_scaled(comp.tau, sigma);
            if (e <= 0.0) return 0.0;
            const double sd = rho * std::sqrt(sigma);
            const Estimate in = gaussian_layer(r, a, sd, n);
            const double w = e * sigma * (n == 1 ? coeff / sd : 1.0);
            inner_err = std::max(inner_err, std::abs(w) * in.error);
            return w * in.value;
        };
        const double mode = std::log(scale);
        const double lo = std::log(table->support_left() * scale);
        const double hi = mode + 40.0 / comp.s;
        std::vector<double> pts{lo, hi};
        for (double p : {mode - 5.0, mode - 2.0, mode, mode + 2.0, mode + 5.0}) {
            if (p > lo && p < hi) pts.push_back(p);
        }
        for (double b : r.profile->breakpoints()) {
            const double d = std::abs(b - a);
            if (d > 0.0) {
                const double p = 2.0 * std::log(d / rho);
                if (p > lo && p < hi) pts.push_back(p);
            }
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        quad::Options opt;
        opt.rel_tol = tol();
        opt.l1_tol = 1e-12;
        // Odd integrands cancel to roundoff, so anchor the target to the function scale.
        opt.abs_tol = 1e-13 * f.bound() * (n == 1 ? std::abs(coeff) / (rho * std::sqrt(scale)) : 1.0);
        const auto res = quad::integrate(outer, std::span<const double>(pts), opt);
        return {res.value, res.error + inner_err * (hi - lo) + SubordinatorQuadrature{}.table_tol * res.l1};
    }

    // ---- Monte Carlo path
    Estimate monte_carlo(const Vector& x, std::span<const Vector> hs) const {
        const int n = static_cast<int>(hs.size());
        const Vector a = drift_t * x;
        if (n == 0) {
            const LayerModel& layer = layers[0];
            return monte_carlo_mean(method.samples, method.seed, tag_value, [&](RandomStream& stream) {
                Vector y;
                std::vector<double> scales;
                layer.sample(stream, y, scales);
                return 0.5 * (f.value(a + y) + f.value(a - y));
            });
        }
        const LayerModel& layer = layers[n - 1];
        const double tau = t / n;
        const Matrix step = drift.matrix(tau);
        std::vector<Matrix> pushes(n);  // T_τ^{n-j} for layer j
        std::vector<FominWeight> weights;
        Matrix power = Matrix::Identity(family.dim(), family.dim());
        for (int j = n; j >= 1; --j) {
            pushes[j - 1] = power;
            power = step * power;
        }
        for (int j = 1; j <= n; ++j) {
            Vector v = hs[j - 1];
            for (int k = 0; k < j; ++k) v = step * v;  // T_τ^j h_j
            weights.emplace_back(layer, v);
        }
        const double parity = (n % 2 == 0) ? 1.0 : -1.0;
        return monte_carlo_mean(method.samples, method.seed, n == 1 ? tag_derivative : tag_nth, [&](RandomStream& stream) {
            Vector total = Vector::Zero(family.dim()), y;
            std::vector<double> scales;
            double weight = 1.0;
            for (int j = 0; j < n; ++j) {
                layer.sample(stream, y, scales);
                weight *= weights[j](y, scales);
                total.noalias() += pushes[j] * y;
            }
            return 0.5 * (f.value(a + total) + parity * f.value(a - total)) * weight;
        });
    }

    Estimate evaluate(const Vector& x, std::span<const Vector> hs) const {
        check_vector(x, family.dim(), "point");
        for (const auto& h : hs) check_vector(h, family.dim(), "direction");
        if (!hs.empty()) check_time(t, true);
        if (t == 0.0) return {f.value(x), 0.0};
        if (static_cast<int>(hs.size()) > max_order) {
            throw InvalidArgument("derivative order exceeds the order this evaluator was prepared for");
        }
        if (method.kind == Method::monte_carlo) return monte_carlo(x, hs);
        if (f.spectrum() != nullptr) return trig(x, hs);
        return ridge(x, hs);
    }
};

SemigroupEvaluator::SemigroupEvaluator(const MeasureFamily& family, const DriftSemigroup& drift, TestFunction f,
                                       double t, MethodSpec method, int max_order)
    : impl_(std::make_unique<Impl>(family, drift, std::move(f), t, method, max_order)) {}

SemigroupEvaluator::~SemigroupEvaluator() = default;
SemigroupEvaluator::SemigroupEvaluator(SemigroupEvaluator&&) noexcept = default;

double SemigroupEvaluator::time() const noexcept { return impl_->t; }

std::span<const Estimate> SemigroupEvaluator::trig_multipliers() const noexcept {
    if (impl_->multipliers.empty()) return {};
    return impl_->multipliers[0];
}

Estimate SemigroupEvaluator::value(const Vector& x) const { return impl_->evaluate(x, {}); }

Estimate SemigroupEvaluator::derivative(const Vector& x, const Vector& h) const {
    return impl_->evaluate(x, std::span<const Vector>(&h, 1));
}

Estimate SemigroupEvaluator::derivative_n(const Vector& x, std::span<const Vector> directions) const {
    require(!directions.empty() && directions.size() <= 3, "derivative order must lie in [1, 3]");
    return impl_->evaluate(x, directions);
}

Estimate apply_semigroup(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f, double t,
                         const Vector& x, const MethodSpec& method) {
    return SemigroupEvaluator(family, drift, f, t, method).value(x);
}

Estimate gateaux_derivative_fomin(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                  double t, const Vector& x, const Vector& h, const MethodSpec& method) {
    check_time(t, true);
    return SemigroupEvaluator(family, drift, f, t, method).derivative(x, h);
}

Estimate nth_derivative_equipartition(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                      double t, const Vector& x, std::span<const Vector> directions,
                                      const MethodSpec& method) {
    check_time(t, true);
    require(!directions.empty() && directions.size() <= 3, "derivative order must lie in [1, 3]");
    return SemigroupEvaluator(family, drift, f, t, method, static_cast<int>(directions.size()))
        .derivative_n(x, directions);
}

// ---------------------------------------------------------------------------
// Fomin derivatives of Gaussian laws

namespace {

struct GaussianFomin {
    Matrix cov;
    Vector precision_v;  // Σ⁻¹ T_t h
};

GaussianFomin gaussian_fomin(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h) {
    check_time(t, true);
    check_vector(h, family.dim(), "direction");
    require(drift.dim() == family.dim(), "drift and family dimensions differ");
    const LawAtTime law = family.law(t);
    if (!law.gaussian()) {
        throw MethodUnavailable("pointwise Fomin derivatives are only available for Gaussian laws");
    }
    GaussianFomin g;
    g.cov = law.covariance();
    Eigen::LLT<Matrix> llt(g.cov);
    if (llt.info() != Eigen::Success) throw InvalidArgument("direction lies outside the Cameron-Martin space");
    g.precision_v = llt.solve(drift.apply(t, h));
    return g;
}

}  // namespace

double fomin_beta(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h, const Vector& y) {
    const auto g = gaussian_fomin(family, drift, t, h);
    check_vector(y, family.dim(), "sample point");
    return -g.precision_v.dot(y);
}

double fomin_l1_norm_exact(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h) {
    const auto g = gaussian_fomin(family, drift, t, h);
    return std::sqrt(2.0 / pi) * std::sqrt(g.precision_v.dot(g.cov * g.precision_v));
}

Estimate fomin_l1_norm(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h,
                       std::size_t samples, std::uint64_t seed) {
    const auto g = gaussian_fomin(family, drift, t, h);
    const LayerModel layer(family.law(t));
    return monte_carlo_mean(samples, seed, tag_fomin, [&](RandomStream& stream) {
        Vector y;
        std::vector<double> scales;
        layer.sample(stream, y, scales);
        return std::abs(g.precision_v.dot(y));
    });
}

Estimate fomin_ibp_residual(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h,
                            const TestFunction& f, std::size_t samples, std::uint64_t seed) {
    const auto g = gaussian_fomin(family, drift, t, h);
    require(f.dim() == family.dim(), "function and family dimensions differ");
    const Vector v = drift.apply(t, h);
    const LayerModel layer(family.law(t));
    return monte_carlo_mean(samples, seed, tag_fomin + 1, [&](RandomStream& stream) {
        Vector y;
        std::vector<double> scales;
        layer.sample(stream, y, scales);
        return f.gradient(y).dot(v) - g.precision_v.dot(y) * f.value(y);
    });
}

Residual skew_convolution_residual(const MeasureFamily& family, const DriftSemigroup& drift, double t, double s,
                                   const TestFunction& f, const Vector& x, std::size_t samples, std::uint64_t seed) {
    check_time(t, false);
    check_time(s, false);
    check_vector(x, family.dim(), "point");
    require(f.dim() == family.dim() && drift.dim() == family.dim(), "dimensions differ");
    if (t == 0.0 || s == 0.0) return {0.0, 0.0};
    const LayerModel total(family.law(t + s));
    const LayerModel first(family.law(t));
    const LayerModel second(family.law(s));
    const Vector a = drift.apply(t + s, x);
    const Vector mid = drift.apply(t, x);
    const Matrix push = drift.matrix(s);

    const Estimate lhs = monte_carlo_mean(samples, seed, tag_lhs, [&](RandomStream& stream) {
        Vector y;
        std::vector<double> scales;
        total.sample(stream, y, scales);
        return 0.5 * (f.value(a + y) + f.value(a - y));
    });
    const Estimate rhs = monte_carlo_mean(samples, seed, tag_rhs, [&](RandomStream& stream) {
        Vector y1, y2;
        std::vector<double> scales;
        first.sample(stream, y1, scales);
        second.sample(stream, y2, scales);
        const Vector base = push * mid;
        const Vector shift = push * y1 + y2;
        return 0.5 * (f.value(base + shift) + f.value(base - shift));
    });
    return {lhs.value - rhs.value, std::hypot(lhs.error, rhs.error)};
}

double finite_difference_step(const Vector& x) { return 1e-4 * std::max(1.0, x.norm()); }

}  // namespace mehler
