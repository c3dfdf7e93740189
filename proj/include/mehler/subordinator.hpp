#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "mehler/support/random.hpp"

namespace mehler {

/// Quadrature and tabulation settings for the one-sided stable density.
struct SubordinatorQuadrature {
    /// Relative tolerance of each density evaluation.
    double rel_tol = 1e-11;
    /// The oscillatory integrand is cut where its envelope falls below this
    /// fraction of its peak.
    double truncation = 1e-16;
    /// Above this many sine half-periods the oscillatory form is abandoned.
    std::size_t max_panels = 4000;
    /// Cancellation ratio (integral of |g| over |integral|) beyond which the
    /// oscillatory value is not trusted.
    double max_cancellation = 100.0;
    /// Panels of the composite rule used for moments and normalization.
    std::size_t moment_panels = 96;
    /// Interpolation budget of the cached table (relative).
    double table_tol = 1e-8;
    /// Smallest sigma covered by the table; below it values are computed directly.
    double table_left = 1e-6;
    /// Negative values within this floor are clipped to zero.
    double negative_floor = 1e-10;
};

/// Which representation produced a density value.
enum class DensityPath { oscillatory, positive_integral, series };

struct DensityEvaluation {
    double value = 0.0;
    DensityPath path = DensityPath::oscillatory;
};

/// Density of the one-sided s-stable law with Laplace transform e^{-λ^s}:
///
///   η(σ) = (1/π) ∫₀^∞ e^{-σr - r^s cos(sπ)} sin(r^s sin(sπ)) dr.
///
/// Direct evaluations use the oscillatory integral when it is well conditioned,
/// a non-oscillatory integral over (0, π) otherwise, and the convergent
/// large-σ series above series_threshold(). Objects are immutable.
class SubordinatorDensity {
public:
    explicit SubordinatorDensity(double s, SubordinatorQuadrature quad = {});

    [[nodiscard]] double s() const noexcept { return s_; }
    [[nodiscard]] const SubordinatorQuadrature& quadrature() const noexcept { return quad_; }

    [[nodiscard]] double density(double sigma) const;
    [[nodiscard]] DensityEvaluation evaluate(double sigma) const;
    /// η_t(σ) = t^{-1/s} η(t^{-1/s} σ).
    [[nodiscard]] double density_scaled(double t, double sigma) const;

    /// Raw oscillatory quadrature; throws NumericalFailure when ill conditioned.
    [[nodiscard]] double density_oscillatory(double sigma) const;
    /// Positive-integrand representation; always well conditioned.
    [[nodiscard]] double density_positive_integral(double sigma) const;
    /// log η and d log η / d log σ from the positive-integrand representation.
    void log_density_and_slope(double sigma, double& log_value, double& log_slope) const;
    /// Large-σ expansion, valid for sigma >= series_threshold().
    [[nodiscard]] double density_series(double sigma) const;
    void log_density_and_slope_series(double sigma, double& log_value, double& log_slope) const;
    [[nodiscard]] double series_threshold() const noexcept { return series_threshold_; }

    /// ∫_σ^∞ τ^q η(τ) dτ for σ >= series_threshold(), q < s.
    [[nodiscard]] double tail_moment(double sigma, double q) const;

    /// ∫₀^∞ τ^q η(τ) dτ; q must lie in [-1/2, s). A non-default panel count
    /// supports refinement studies.
    [[nodiscard]] double fractional_moment(double q, std::size_t panels = 0) const;

    /// Sigma below which log η < log_floor (found by bisection).
    [[nodiscard]] double lower_cutoff(double log_floor) const;

    /// Positive-stable draw with density η_t (Chambers-Mallows-Stuck).
    double sample(double t, RandomStream& stream) const;

private:
    double s_;
    SubordinatorQuadrature quad_;
    double series_threshold_;
};

/// Cached log-log cubic Hermite table of η for one exponent.
///
/// Table nodes carry exact values and slopes; intervals are bisected until
/// the midpoint value matches a direct evaluation within table_tol. Values
/// above the table come from the series, values below from direct quadrature.
class SubordinatorTable {
public:
    explicit SubordinatorTable(double s, SubordinatorQuadrature quad = {});

    /// Shared instance per exponent (default quadrature); thread safe.
    static std::shared_ptr<const SubordinatorTable> get(double s);

    [[nodiscard]] const SubordinatorDensity& exact() const noexcept { return exact_; }
    [[nodiscard]] double s() const noexcept { return exact_.s(); }

    [[nodiscard]] double density(double sigma) const;
    [[nodiscard]] double density_scaled(double t, double sigma) const;

    /// Smallest sigma with a meaningful density (log η > -700).
    [[nodiscard]] double support_left() const noexcept { return left_; }
    [[nodiscard]] double table_right() const noexcept { return log_sigma_.empty() ? 0.0 : right_; }
    [[nodiscard]] std::size_t node_count() const noexcept { return log_sigma_.size(); }
    /// Largest relative midpoint error observed while building the table.
    [[nodiscard]] double max_midpoint_error() const noexcept { return max_error_; }

private:
    double interpolate_log(double log_sigma) const;

    SubordinatorDensity exact_;
    double left_ = 0.0;
    double table_left_ = 0.0;
    double right_ = 0.0;
    double max_error_ = 0.0;
    std::vector<double> log_sigma_;
    std::vector<double> log_value_;
    std::vector<double> log_slope_;
};

double eta_density(double s, double sigma);
double eta_density_scaled(double s, double t, double sigma);
double sample_positive_stable(double s, double t, RandomStream& stream);
double fractional_moment(double s, double q);

}  // namespace mehler
