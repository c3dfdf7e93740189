#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mehler/engine.hpp"

namespace mehler {

/// A scalar field with an error estimate per evaluation.
using Field = std::function<Estimate(const Vector&)>;

/// Exact evaluation of a catalog function; the error is its rounding level.
Field field_of(const TestFunction& f);

/// Probe points and H-directions over which suprema are taken.
struct ProbeSet {
    std::vector<Vector> points;
    std::vector<Vector> directions;

    /// Regular lattice on [lo, hi]^dim plus `extra` quasi-random (R-sequence) points.
    static ProbeSet lattice(int dim, double lo, double hi, std::size_t per_axis, std::size_t extra,
                            std::vector<Vector> directions);
    /// Unit-H-norm directions of the rule plus `random` normalized combinations.
    static std::vector<Vector> directions_for(const HNormRule& rule, std::size_t random = 0, std::uint64_t seed = 1);
};

/// 2^{-j} for j in [j_min, j_max].
std::vector<double> dyadic_scales(int j_min, int j_max);

struct SeminormEstimate {
    double value = 0.0;
    double exponent = 0.0;  ///< α for Hölder, 1 for Zygmund
    Vector x;               ///< maximizing probe
    Vector h;
    double scale = 0.0;
    std::size_t evaluations = 0;
};

/// max |f(x + r h) - f(x)| / (r‖h‖_H)^α over probes and scales: a lower bound on [f]_{C^α_H}.
SeminormEstimate holder_seminorm(const Field& f, double alpha, const HNormRule& rule, const ProbeSet& probes,
                                 std::span<const double> scales);
/// max |f(x + 2rh) - 2f(x + rh) + f(x)| / (r‖h‖_H): a lower bound on [f]_{Z¹_H}.
SeminormEstimate zygmund_seminorm(const Field& f, const HNormRule& rule, const ProbeSet& probes,
                                  std::span<const double> scales);

struct ScaleRow {
    double scale = 0.0;
    double sup_difference = 0.0;
    double ratio = 0.0;  ///< sup_difference / scale
    double noise = 0.0;
    bool used = false;
};

struct ExponentFit {
    double slope = 0.0;
    double window_min = 0.0;
    double window_max = 0.0;
    double residual = 0.0;
    int order = 1;
    bool saturated = false;
    bool degenerate = false;
    std::vector<ScaleRow> rows;
};

/// sup over probes of |Δ^d_{rh} f(x)| per scale r (with ‖h‖_H = 1).
std::vector<ScaleRow> difference_profile(const Field& f, const ProbeSet& probes, std::span<const double> scales,
                                         int order);

/// Slope of log sup|Δ^d_{rh} f| against log r over the window. Scales whose
/// difference is below ten times the noise are dropped; the slope is flagged
/// saturated when it reaches the difference order.
ExponentFit regularity_exponent(const Field& f, const ProbeSet& probes, double window_min, double window_max,
                                int order, int levels_per_octave = 1);

/// (ratio at the finest scale / ratio at the coarsest)^{1/decades} - 1.
double growth_per_decade(std::span<const ScaleRow> rows);
/// (max ratio - min ratio) / max ratio.
double ratio_variation(std::span<const ScaleRow> rows);

struct DecayOptions {
    ProbeSet probes;
    MethodSpec method = MethodSpec::quadrature(1e-8);
    /// Refine the best probe by a one-dimensional maximization along each direction.
    bool refine = true;
};

struct DecayRow {
    double t = 0.0;
    double sup_derivative = 0.0;
    double error = 0.0;
};

struct DecayFit {
    ExponentFit fit;          ///< slope of log sup|D^n P_t f| against log t
    std::vector<DecayRow> rows;
    bool noisy = false;       ///< error above 10% of the value at some time
};

/// Fitted slope of t ↦ sup_x |D^n P_t f(x)(h,…,h)|; expected -nθ for bounded f
/// and -(n-α)θ for f ∈ C^α_H.
DecayFit derivative_decay_exponent(const MeasureFamily& family, const DriftSemigroup& drift, const TestFunction& f,
                                   int order, std::span<const double> times, const DecayOptions& options);

struct InterpolationCheck {
    double holder = 0.0;      ///< probe lower bound on [F]_{C^α}
    double derivative = 0.0;  ///< sup over probes of ‖D_H F‖
    double sup = 0.0;         ///< sup |F|
    double bound = 0.0;       ///< 2^{1-α} derivative^α sup^{1-α}
    double residual = 0.0;    ///< bound - holder (≥ 0 required)
};

InterpolationCheck interpolation_bound_residual(const TestFunction& f, double alpha, const HNormRule& rule,
                                                const ProbeSet& probes, std::span<const double> scales);

}  // namespace mehler
