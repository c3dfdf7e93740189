#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mehler/functions.hpp"
#include "mehler/support/linalg.hpp"
#include "mehler/support/numeric.hpp"
#include "mehler/support/random.hpp"

namespace mehler {

/// Drift semigroup T_t with a bound ‖T_t‖ ≤ M e^{ωt}.
class DriftSemigroup {
public:
    enum class Kind { identity, scalar_decay, matrix_exp, spectral_diag };

    static DriftSemigroup identity(int dim);
    /// T_t = e^{-rate·t} I
    static DriftSemigroup scalar_decay(int dim, double rate = 1.0);
    /// T_t = e^{-tB}
    static DriftSemigroup matrix_exp(const Matrix& b);
    /// T_t = diag(e^{a_k t})
    static DriftSemigroup spectral_diag(const Vector& eigenvalues);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] std::string name() const;

    [[nodiscard]] Vector apply(double t, const Vector& x) const;
    [[nodiscard]] Matrix matrix(double t) const;
    [[nodiscard]] double bound_constant() const noexcept { return m_; }
    [[nodiscard]] double growth_rate() const noexcept { return omega_; }
    /// max over probes of |T_{t+s}x - T_t T_s x| / |x|
    [[nodiscard]] double composition_residual(double t, double s, std::span<const Vector> probes) const;

private:
    Kind kind_ = Kind::identity;
    int dim_ = 0;
    double rate_ = 0.0;
    Matrix b_;
    Vector eigen_;
    double m_ = 1.0;
    double omega_ = 0.0;
};

/// Norm on the directions H: Euclidean or Cameron-Martin ‖Q^{-1/2}h‖.
class HNormRule {
public:
    static HNormRule euclidean(int dim);
    static HNormRule cameron_martin(const Matrix& q);

    [[nodiscard]] bool is_euclidean() const noexcept { return euclidean_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] double norm(const Vector& h) const;
    /// sup over ‖h‖_H ≤ 1 of ⟨g, h⟩.
    [[nodiscard]] double dual_norm(const Vector& g) const;
    /// Directions of unit H-norm along the eigenbasis of Q (or the coordinate axes).
    [[nodiscard]] std::vector<Vector> unit_directions() const;

private:
    bool euclidean_ = true;
    int dim_ = 0;
    Matrix q_;
    Eigen::LLT<Matrix> chol_;
};

/// Y = factor · sqrt(S) · Z with Z standard normal; S ~ η⁽ˢ⁾_τ when s < 1, S = τ when s = 1.
struct LawComponent {
    Matrix factor;
    double s = 1.0;
    double tau = 1.0;

    [[nodiscard]] bool mixed() const noexcept { return s < 1.0; }
    /// -log E exp(i ξ·Y) = τ (½|factorᵀξ|²)^s
    [[nodiscard]] double log_char(const Vector& xi) const;
};

/// μ_t as a sum of independent components (empty for t = 0).
struct LawAtTime {
    int dim = 0;
    std::vector<LawComponent> components;

    [[nodiscard]] bool dirac() const noexcept { return components.empty(); }
    [[nodiscard]] bool gaussian() const noexcept;
    /// Covariance of a Gaussian law.
    [[nodiscard]] Matrix covariance() const;
    /// -log of the characteristic function, closed form.
    [[nodiscard]] double log_char(const Vector& xi) const;
};

/// One draw of μ_t together with its conditional Gaussian covariance scales.
struct LawSample {
    Vector y;
    std::vector<double> scales;  ///< S_j per component
};

class MeasureFamily {
public:
    enum class Kind {
        gaussian_heat,
        fractional_heat,
        ou_fractional,
        classical_ou,
        gross_gaussian,
        gross_mixture,
        p_scaled,
        truncated_spectral
    };

    /// N(0, 2tI)
    static MeasureFamily gaussian_heat(int dim);
    /// symbol e^{-t|ξ|^{2s}}
    static MeasureFamily fractional_heat(int dim, double s);
    /// symbol exp(-½∫₀^t |Q^{1/2}e^{-σBᵀ}ξ|^{2s} dσ), drift e^{-tB}
    static MeasureFamily ou_fractional(const Matrix& q, const Matrix& b, double s);
    /// N(0, (1 - e^{-2t})Q), drift e^{-t}
    static MeasureFamily classical_ou(const Matrix& q);
    /// N(0, tQ), no drift
    static MeasureFamily gross_gaussian(const Matrix& q);
    /// ∫ N(0, σQ) η⁽ˢ⁾_t(σ) dσ, no drift
    static MeasureFamily gross_mixture(const Matrix& q, double s);
    /// μ∘[(1 - e^{-pt})^{1/p}]^{-1} with μ the mixture with exponent p/2 at time 1/p; drift e^{-t}
    static MeasureFamily p_scaled(const Matrix& q, double p);
    /// Diagonal OU: drift e^{ta_k}, covariance q_k (1 - e^{2a_k t}) / (-2a_k)
    static MeasureFamily truncated_spectral(const Vector& drift_eigenvalues, const Vector& covariance);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] std::string name() const;
    [[nodiscard]] double s() const noexcept { return s_; }
    [[nodiscard]] double p() const noexcept { return p_; }
    [[nodiscard]] const Matrix& q() const noexcept { return q_; }
    [[nodiscard]] const Matrix& b() const noexcept { return b_; }
    /// Smoothing exponent θ in ‖D_H P_t f‖ ≤ C e^{ωt} t^{-θ} sup|f|.
    [[nodiscard]] double theta() const noexcept;
    [[nodiscard]] bool mixture() const noexcept;

    [[nodiscard]] LawAtTime law(double t) const;
    [[nodiscard]] DriftSemigroup natural_drift() const;
    [[nodiscard]] HNormRule h_norm() const;

private:
    Kind kind_ = Kind::gaussian_heat;
    int dim_ = 0;
    double s_ = 1.0;
    double p_ = 2.0;
    Matrix q_;
    Matrix sqrt_q_;
    Matrix b_;
    Vector eigen_;
};

/// Draws one sample of the law.
LawSample sample_law(const LawAtTime& law, RandomStream& stream);

/// Sampler of a fixed law, prepared once for many draws.
class LawSampler {
public:
    explicit LawSampler(const LawAtTime& law);
    ~LawSampler();
    LawSampler(LawSampler&&) noexcept;

    [[nodiscard]] LawSample operator()(RandomStream& stream) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

enum class Method { quadrature, monte_carlo };

struct MethodSpec {
    Method kind = Method::quadrature;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    double rel_tol = 1e-10;

    static MethodSpec quadrature(double rel_tol = 1e-10) { return {Method::quadrature, 0, 0, rel_tol}; }
    static MethodSpec monte_carlo(std::size_t n, std::uint64_t seed) { return {Method::monte_carlo, n, seed, 0.0}; }
};

/// P_t and its Fomin-weighted derivatives at a fixed time, prepared once and
/// evaluated at many points. Immutable after construction.
///
/// Quadrature covers trigonometric functions for every family (Gaussian layer
/// in closed form, subordinator layer by σ-quadrature) and ridge functions
/// when μ_t has a single component (nested σ and one-dimensional quadrature;
/// derivatives of order ≥ 2 need a Gaussian law). Other combinations raise
/// MethodUnavailable. Monte Carlo uses antithetic pairs and conditional
/// Gaussian Fomin weights -⟨C⁻¹v, y⟩.
class SemigroupEvaluator {
public:
    SemigroupEvaluator(const MeasureFamily& family, const DriftSemigroup& drift, TestFunction f, double t,
                       MethodSpec method = {}, int max_order = 1);
    ~SemigroupEvaluator();
    SemigroupEvaluator(SemigroupEvaluator&&) noexcept;

    [[nodiscard]] double time() const noexcept;
    [[nodiscard]] Estimate value(const Vector& x) const;
    /// D_H P_t f(x)(h) = -∫ f(T_t x + y) β_{T_t h}(y) μ_t(dy)
    [[nodiscard]] Estimate derivative(const Vector& x, const Vector& h) const;
    /// n-fold equipartition formula with one Fomin factor per μ_{t/n} layer (n ≤ max_order ≤ 3).
    [[nodiscard]] Estimate derivative_n(const Vector& x, std::span<const Vector> directions) const;
    /// χ_k multiplying each trigonometric term in the value formula; empty unless
    /// the evaluator uses quadrature on a trigonometric function at t > 0.
    [[nodiscard]] std::span<const Estimate> trig_multipliers() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Estimate apply_semigroup(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f, double t,
                         const Vector& x, const MethodSpec& method = {});
Estimate gateaux_derivative_fomin(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                  double t, const Vector& x, const Vector& h, const MethodSpec& method = {});
Estimate nth_derivative_equipartition(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                      double t, const Vector& x, std::span<const Vector> directions,
                                      const MethodSpec& method = {});

/// β^{μ_t}_{T_t h}(y) = -⟨Σ_t⁻¹ T_t h, y⟩ for Gaussian μ_t.
double fomin_beta(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h, const Vector& y);
/// Closed form √(2/π) ‖T_t h‖_{H_{μ_t}} of ‖β^{μ_t}_{T_t h}‖_{L¹(μ_t)} for Gaussian μ_t.
double fomin_l1_norm_exact(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h);
/// Monte-Carlo estimate of ‖β^{μ_t}_{T_t h}‖_{L¹(μ_t)} for Gaussian μ_t.
Estimate fomin_l1_norm(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h,
                       std::size_t samples, std::uint64_t seed);
/// E[∂_v f + β_v f] under μ_t with v = T_t h (zero when the Fomin rule is right).
Estimate fomin_ibp_residual(const MeasureFamily& family, const DriftSemigroup& drift, double t, const Vector& h,
                            const TestFunction& f, std::size_t samples, std::uint64_t seed);

struct Residual {
    double value = 0.0;  ///< signed residual
    double error = 0.0;  ///< one standard error (MC) or quadrature error bound
};

/// P_{t+s}f(x) - P_t(P_s f)(x) by independent Monte-Carlo estimates of both sides.
Residual skew_convolution_residual(const MeasureFamily& family, const DriftSemigroup& drift, double t, double s,
                                   const TestFunction& f, const Vector& x, std::size_t samples, std::uint64_t seed);

/// Central finite difference step used for derivative cross-checks.
double finite_difference_step(const Vector& x);

/// Smallest time accepted by the derivative operations.
inline constexpr double min_derivative_time = 1e-6;

}  // namespace mehler
