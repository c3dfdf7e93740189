#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "mehler/engine.hpp"

namespace mehler {

/// Composite Gauss-Kronrod rule in time: one panel on [0, t_min], then
/// geometric panels of ratio 2 up to the tail cutoff.
struct TimeRule {
    std::vector<double> nodes;
    std::vector<double> weights;        ///< Kronrod weights
    std::vector<double> gauss_weights;  ///< embedded Gauss weights (0 at Kronrod-only nodes)
    std::vector<std::size_t> panel_start;  ///< index of the first node of each panel
    double cutoff = 0.0;
};

/// Rule for ∫₀^T_tail e^{-λt}(·) dt; the e^{-λt} factor is folded into the weights.
TimeRule laplace_time_rule(double lambda, double cutoff, double t_min = 1e-6);
/// Rule for ∫₀^t (·)(u) du with u = t v² and geometric panels in v toward v = 0.
TimeRule graded_time_rule(double t, double v_min = 1.0 / 4096.0);

struct ResolventOptions {
    MethodSpec inner = MethodSpec::quadrature(1e-10);
    double t_min = 1e-6;
    double tail_factor = 30.0;
};

/// u = R(λ, L)f = ∫₀^∞ e^{-λt} P_t f dt, prepared once for many points.
class ResolventEvaluator {
public:
    ResolventEvaluator(const MeasureFamily& family, const DriftSemigroup& drift, TestFunction f, double lambda,
                       ResolventOptions options = {});
    ~ResolventEvaluator();
    ResolventEvaluator(ResolventEvaluator&&) noexcept;

    [[nodiscard]] double lambda() const noexcept;
    [[nodiscard]] double tail_cutoff() const noexcept;
    /// sup|f| e^{-λ T_tail} / λ
    [[nodiscard]] double tail_bound() const noexcept;
    [[nodiscard]] Estimate value(const Vector& x) const;

    struct Trigonometric {
        TestFunction u;
        double error;  ///< uniform bound on |u - R(λ)f|
    };
    /// When the drift is the identity and f is trigonometric, u is a
    /// trigonometric polynomial with the same frequencies; returns it.
    [[nodiscard]] std::optional<Trigonometric> as_trigonometric() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ResolventProblem {
    MeasureFamily family;
    DriftSemigroup drift;
    TestFunction f;
    double lambda;
    ResolventOptions options{};
};

Estimate resolvent(const ResolventProblem& problem, const Vector& x);

/// (1/λ) E f(T_τ x + Y_τ) with τ ~ Exp(λ); covers every law the sampler covers.
Estimate resolvent_monte_carlo(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                               double lambda, const Vector& x, std::size_t samples, std::uint64_t seed);

/// Scalar time profile a(r) of a separable forcing g(r, x) = a(r) φ(x).
using TimeProfile = std::function<double(double)>;

struct CauchyProblem {
    MeasureFamily family;
    DriftSemigroup drift;
    double horizon;
    TestFunction initial;
    TestFunction forcing;
    TimeProfile forcing_profile{};  ///< empty means a ≡ 1
    MethodSpec inner = MethodSpec::quadrature(1e-10);
};

/// v(t) = P_t f + ∫₀^t P_{t-r} g(r, ·) dr, prepared for one t and many points.
class MildSolutionEvaluator {
public:
    MildSolutionEvaluator(const CauchyProblem& problem, double t);
    ~MildSolutionEvaluator();
    MildSolutionEvaluator(MildSolutionEvaluator&&) noexcept;

    [[nodiscard]] double time() const noexcept;
    [[nodiscard]] Estimate value(const Vector& x) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

Estimate mild_solution(const CauchyProblem& problem, double t, const Vector& x);

/// R(λ)f - R(μ)f - (μ-λ) R(λ)R(μ)f at x. R(λ)R(μ)f is computed by applying
/// the λ-resolvent to the μ-resolvent: exactly when the latter is a
/// trigonometric polynomial, otherwise by exponential-time Monte Carlo.
Residual resolvent_identity_residual(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                     double lambda, double mu, const Vector& x, std::size_t samples = 4000,
                                     std::uint64_t seed = 1, ResolventOptions options = {});

/// Symbol m with P_t cos(ξ·x) = e^{-t m(ξ)} cos(ξ·x); only for drift-free families
/// whose exponent is linear in t.
std::function<double(const Vector&)> translation_invariant_symbol(const MeasureFamily& family);

/// Σ a_k cos(ξ_k·x + φ_k) / (λ + m(ξ_k)) plus c/λ.
TestFunction multiplier_resolvent_oracle(const std::function<double(const Vector&)>& symbol, double lambda,
                                         const TestFunction& f);
/// Mild solution for trigonometric data under a multiplier semigroup:
/// e^{-tm} a_k for the initial datum, (1 - e^{-tm})/m b_k for a constant-in-time forcing.
TestFunction multiplier_mild_oracle(const std::function<double(const Vector&)>& symbol, double t,
                                    const TestFunction& initial, const TestFunction& forcing);

}  // namespace mehler
