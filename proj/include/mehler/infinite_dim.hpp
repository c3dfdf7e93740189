#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mehler/engine.hpp"
#include "mehler/resolvent.hpp"

namespace mehler {

enum class ModelKind { classical_ou, smoothing_ou, gross, gross_fractional, nongauss_p };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Spectral rules of a diagonal model. The covariance is q_k = q_scale·k^{-q_decay}
/// unless an explicit list is given; the drift spectrum (smoothing_ou only) is
/// a_k = -drift_scale·k².
struct ModelParams {
    double s = 0.5;  ///< gross_fractional
    double p = 1.0;  ///< nongauss_p
    double q_scale = 1.0;
    double q_decay = 3.0;
    double drift_scale = 9.869604401089358;  // π²
    std::vector<double> covariance;

    /// Per-kind defaults: smoothing_ou uses Q = 2I.
    static ModelParams defaults(ModelKind kind);
};

/// Truncations above this many modes are spectral-only (no dense engine family).
inline constexpr int dense_mode_limit = 512;

/// K-mode diagonal realization of an infinite-dimensional model.
class SpectralModel {
public:
    [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
    [[nodiscard]] int modes() const noexcept { return modes_; }
    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    /// q_k
    [[nodiscard]] const Vector& covariance() const noexcept { return q_; }
    /// a_k for smoothing_ou; -1 for the OU kinds; 0 for the Gross kinds.
    [[nodiscard]] const Vector& eigenvalues() const noexcept { return a_; }
    /// Σ_{k≤K} of the trace-relevant sequence (q_k, or q_k/(-2a_k) for smoothing_ou).
    [[nodiscard]] double partial_trace() const noexcept { return trace_; }
    /// Integral bound on the neglected tail of that sequence.
    [[nodiscard]] double tail_estimate() const noexcept { return tail_; }
    [[nodiscard]] double tail_ratio() const noexcept { return tail_ / trace_; }

    /// Diagonal of Q_t for the Gaussian kinds.
    [[nodiscard]] Vector covariance_at(double t) const;
    /// Throws InvalidArgument above dense_mode_limit.
    [[nodiscard]] const MeasureFamily& family() const;
    [[nodiscard]] const DriftSemigroup& drift() const;
    /// Euclidean for smoothing_ou, Cameron-Martin of Q otherwise.
    [[nodiscard]] HNormRule h_norm() const;
    /// k-th coordinate vector (1-based).
    [[nodiscard]] Vector mode(int k) const;

private:
    friend SpectralModel build_model(ModelKind, int, const ModelParams&);

    ModelKind kind_ = ModelKind::gross;
    int modes_ = 0;
    ModelParams params_;
    Vector q_;
    Vector a_;
    double trace_ = 0.0;
    double tail_ = 0.0;
    std::shared_ptr<const MeasureFamily> family_;
    std::shared_ptr<const DriftSemigroup> drift_;
};

/// Fails with InvalidArgument on a divergent trace rule or invalid parameters.
SpectralModel build_model(ModelKind kind, int modes, const ModelParams& params);
SpectralModel build_model(ModelKind kind, int modes);

struct SmoothingNorm {
    double value = 0.0;
    int argmax = 0;             ///< maximizing mode (1-based)
    bool at_truncation = false;  ///< argmax = K: truncation too small
};

/// ‖Q_t^{-1/2} e^{tA}‖ = sup_k e^{a_k t} / sqrt(q_k(t)) over the K modes (smoothing_ou only).
SmoothingNorm smoothing_norm(const SpectralModel& model, double t);

struct SmoothingFit {
    std::vector<double> times;
    std::vector<SmoothingNorm> norms;
    LineFit fit;
};

SmoothingFit smoothing_norm_slope(const SpectralModel& model, std::span<const double> times);

struct CameronMartinScaling {
    double ratio_exact = 0.0;    ///< (1 - e^{-2t})^{-1/2}
    double ratio_numeric = 0.0;  ///< ‖h‖_{H_{μ_t}} / ‖h‖_{H_μ} from the law covariance
    double beta_expected = 0.0;  ///< √(2/π) e^{-t} (1 - e^{-2t})^{-1/2} ‖h‖_{H_μ}
    Estimate beta;               ///< Monte-Carlo ‖β^{μ_t}_{T_t h}‖_{L¹(μ_t)}
};

CameronMartinScaling cameron_martin_scaling(const SpectralModel& model, double t, const Vector& h, std::size_t samples,
                                            std::uint64_t seed);

/// ξ-kernel of the Kato integral. `corrected` is ξˢ/(λ² + 2λξˢcos sπ + ξ^{2s});
/// `as_printed` is ξˢ/(λ² - 2ξˢcos sπ + ξ^{2s}), which reproduces c/λ only at s = ½.
enum class KatoKernel { corrected, as_printed };

struct KatoOptions {
    KatoKernel kernel = KatoKernel::corrected;
    ResolventOptions inner{MethodSpec::quadrature(1e-10)};
    double rel_tol = 1e-9;
};

/// (sin sπ/π) ∫₀^∞ R(ξ, L)f(x) k(ξ) dξ with L the Gross generator of the model.
Estimate kato_resolvent(const SpectralModel& model, double s, double lambda, const TestFunction& f, const Vector& x,
                        const KatoOptions& options = {});
/// (sin sπ/π) ∫₀^∞ k(ξ)/ξ dξ, equal to 1/λ for the corrected kernel.
Estimate kato_constant_integral(double s, double lambda, KatoKernel kernel);

/// Law of a second summand in μ ∗ ν.
class ConvolutionPartner {
public:
    static ConvolutionPartner dirac(int dim);
    static ConvolutionPartner gaussian(const Matrix& covariance);
    static ConvolutionPartner discrete(std::vector<Vector> atoms, std::vector<double> weights);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] Vector sample(RandomStream& stream) const;

private:
    int dim_ = 0;
    Matrix factor_;
    std::vector<Vector> atoms_;
    std::vector<double> cumulative_;
};

struct ConvolutionFominOptions {
    int degree = 9;  ///< total Hermite degree of the test basis
    std::size_t fit_samples = 200000;
    std::size_t norm_samples = 200000;
    std::uint64_t seed = 1;
};

struct ConvolutionFominCheck {
    Estimate convolution;        ///< ‖β^{μ∗ν}_v‖_{L¹(μ∗ν)}
    double base = 0.0;           ///< ‖β^μ_v‖_{L¹(μ)} = √(2/π)‖v‖_{H_μ}
    double ibp_z_score = 0.0;    ///< max_i |mean of ∂_vφ_i + β̂φ_i| / standard error, fresh samples
    std::size_t basis_size = 0;

    [[nodiscard]] bool holds() const noexcept { return convolution.value <= base + 3.0 * convolution.error; }
};

/// β^{μ∗ν}_v fitted by the integration-by-parts identity E[∂_vφ] = -E[βφ] over
/// a Hermite basis in whitened coordinates; μ = N(0, covariance).
ConvolutionFominCheck convolution_fomin_check(const Matrix& covariance, const ConvolutionPartner& nu, const Vector& v,
                                              const ConvolutionFominOptions& options = {});

/// Measure with a closed-form Fomin derivative: N(0, Σ) ∗ ½(δ_a + δ_{-a}) (a = 0 gives the Gaussian).
class FominMeasure {
public:
    FominMeasure(const Matrix& covariance, const Vector& shift);

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(cov_.rows()); }
    [[nodiscard]] Vector sample(RandomStream& stream) const;
    [[nodiscard]] double beta(const Vector& h, const Vector& y) const;
    /// Law of c·Y.
    [[nodiscard]] FominMeasure scaled(double c) const;

private:
    Matrix cov_;
    Matrix factor_;
    Vector shift_;
    Eigen::LLT<Matrix> chol_;
};

struct RescaledBetaCheck {
    double pointwise = 0.0;  ///< max |β^{ν_c}_h(y) - β^ν_h(y/c)/c| over samples
    Estimate scaled_norm;    ///< ‖β^{ν_c}_h‖ from samples of ν_c
    Estimate base_norm;      ///< ‖β^ν_h‖ from independent samples of ν
    double ratio = 0.0;      ///< scaled_norm / base_norm
    double ratio_error = 0.0;
};

RescaledBetaCheck rescaled_beta_check(const FominMeasure& nu, double c, const Vector& h, std::size_t samples,
                                      std::uint64_t seed);

struct CharacteristicProbe {
    Vector frequency;
    double expected = 0.0;  ///< exp(-t(½⟨Qa,a⟩)^s)
    Estimate empirical;     ///< E cos⟨a, Y⟩
    double imaginary = 0.0; ///< E sin⟨a, Y⟩
    double z_score = 0.0;
};

/// Empirical characteristic function of sampled μ_t against the closed form.
std::vector<CharacteristicProbe> mixture_characteristic_check(const MeasureFamily& family, double t,
                                                              std::span<const Vector> frequencies, std::size_t samples,
                                                              std::uint64_t seed);

}  // namespace mehler
