#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

#include <json.hpp>

#include "mehler/subordinator.hpp"
#include "mehler/support/linalg.hpp"
#include "mehler/support/numeric.hpp"

namespace mehler {

/// g_t(x) = (4πt)^{-N/2} exp(-|x|²/4t): variance 2t per coordinate, symbol e^{-t|ξ|²}.
double gauss_heat_kernel(int dim, double t, const Vector& x);

/// Fractional heat kernel p_{s,t}, the subordinated mixture ∫ g_ξ η_t(ξ) dξ
/// with symbol e^{-t|ξ|^{2s}}.
class FracHeatKernel {
public:
    FracHeatKernel(int dim, double s);

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] double s() const noexcept { return s_; }

    /// p_{s,t}(x) via p_{s,1} and the homogeneity rescaling.
    [[nodiscard]] double value(double t, const Vector& x) const;
    /// p_{s,t}(x) mixing g_ξ directly against η_t, without the rescaling.
    [[nodiscard]] double value_unscaled(double t, const Vector& x) const;
    [[nodiscard]] Vector gradient(double t, const Vector& x) const;

    /// p_{s,1} as a function of |z|.
    [[nodiscard]] double unit_profile(double radius) const;
    /// ∫ g_ξ(z) η(ξ) / (2ξ) dξ, so that ∇p_{s,1}(z) = -z · unit_gradient_factor(|z|).
    [[nodiscard]] double unit_gradient_factor(double radius) const;

    /// ‖∂_k p_{s,t}‖_{L¹} = t^{-1/(2s)} π^{-1/2} ∫ η(ξ) ξ^{-1/2} dξ (any axis).
    [[nodiscard]] double grad_l1(double t) const;

private:
    double mixture(double radius, double weight_power, double time) const;

    int dim_;
    double s_;
    std::shared_ptr<const SubordinatorTable> eta_;
};

double frac_heat_kernel(int dim, double s, double t, const Vector& x);
double frac_kernel_grad_l1(int dim, double s, double t, int axis);

/// Parameters of the OU-fractional family: symbol
/// φ_t(ξ) = exp(-½ ∫₀^t |Q^{1/2} e^{-σBᵀ} ξ|^{2s} dσ).
struct OUFracParams {
    Matrix q;
    Matrix b;
    double s = 0.5;
};

/// φ_t for one (Q, B, s, t). The σ-integral uses a Gauss-Legendre rule whose
/// order is doubled until probe exponents agree to the relative tolerance.
class OUFracSymbol {
public:
    OUFracSymbol(const OUFracParams& params, double t, double rel_tol = 1e-10);

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(sqrt_q_.rows()); }
    [[nodiscard]] double time() const noexcept { return t_; }
    [[nodiscard]] double s() const noexcept { return s_; }
    [[nodiscard]] std::size_t order() const noexcept { return weights_.size(); }
    /// Quadrature factors Q^{1/2} e^{-σ_j Bᵀ} and weights of the σ-rule.
    [[nodiscard]] const std::vector<Matrix>& factors() const noexcept { return factors_; }
    [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }

    /// ½ ∫₀^t |Q^{1/2} e^{-σBᵀ} ξ|^{2s} dσ.
    [[nodiscard]] double exponent(const Vector& xi) const;
    [[nodiscard]] double operator()(const Vector& xi) const;
    /// φ̃_t(ξ) = φ_t(t^{-1/(2s)} ξ): symbol of the rescaled kernel g̃_t.
    [[nodiscard]] double rescaled(const Vector& xi) const;

private:
    void build(std::size_t order);

    Matrix sqrt_q_;
    Matrix b_;
    double s_;
    double t_;
    bool drift_free_;
    std::vector<Matrix> factors_;  // Q^{1/2} e^{-σ_j Bᵀ}
    std::vector<double> weights_;
};

double ou_frac_symbol(const OUFracParams& params, double t, const Vector& xi);

/// Uniform periodic tensor grid, nodes x_j = (j - n/2) h per axis.
struct KernelGrid {
    int dim = 1;
    std::size_t nodes = 0;
    double spacing = 0.0;

    [[nodiscard]] double extent() const noexcept { return static_cast<double>(nodes) * spacing; }
    [[nodiscard]] double coordinate(std::size_t j) const noexcept {
        return (static_cast<double>(j) - static_cast<double>(nodes / 2)) * spacing;
    }
    [[nodiscard]] std::size_t size() const noexcept { return dim == 1 ? nodes : nodes * nodes; }
    void validate() const;
};

/// Grid sizing rule for the rescaled kernel g̃_t.
struct GridPolicy {
    /// Nodes per half-width-at-half-maximum of g̃_t.
    double points_per_width = 64.0;
    /// Minimum half-extent in half-widths.
    double min_half_widths = 8.0;
    /// Heavy tails decay like |x|^{-N-2s}; the half-extent is widened until
    /// the periodic aliasing estimate drops below this level.
    double alias_target_1d = 1e-5;
    double alias_target_2d = 1e-3;
    /// Minimum half-extent in rescaled units.
    double min_half_extent = 4.0;
    /// The symbol must fall below this value inside the Nyquist band.
    double symbol_floor = 1e-15;
    std::size_t max_nodes_1d = std::size_t{1} << 18;
    std::size_t max_nodes_2d = 1024;
};

/// Kernel values (and optionally first derivatives) of g_t on a physical grid.
struct GriddedKernel {
    KernelGrid grid;                          ///< physical coordinates
    double scale = 1.0;                       ///< t^{1/(2s)}
    std::vector<double> values;               ///< row-major; axis 0 is the slow index
    std::vector<std::vector<double>> gradient;  ///< per axis, empty unless requested
    double normalization = 0.0;               ///< Σ g h^N
    double peak = 0.0;
    double min_value = 0.0;
    double imag_residue = 0.0;                ///< max |Im| relative to peak
    double band_edge = 0.0;                   ///< largest symbol value on the outer frequency ring
    double boundary_ratio = 0.0;              ///< largest |g| on the outer spatial ring over the peak
    double s = 0.0;
    double t = 0.0;
    Matrix q;
    Matrix b;

    [[nodiscard]] double cell_volume() const;
    /// ‖∂_k g_t‖_{L¹} by grid summation.
    [[nodiscard]] double grad_l1(int axis) const;
};

/// Grid for g̃_t chosen from the symbol (half-widths, Nyquist band, tails).
KernelGrid choose_rescaled_grid(const OUFracSymbol& symbol, const GridPolicy& policy = {});

/// g_t = t^{-N/(2s)} g̃_t(x / t^{1/(2s)}), g̃_t = (2π)^{-N} F(φ̃_t), on the given
/// rescaled grid. Fails with NumericalFailure when the symbol is not resolved
/// (band edge above 1e-6), the grid is too small (boundary above 1e-2 of the
/// peak), or the normalization, negativity or realness checks fail.
GriddedKernel ou_frac_kernel(const OUFracParams& params, double t, const KernelGrid& rescaled_grid,
                             bool with_gradient = false);
GriddedKernel ou_frac_kernel(const OUFracParams& params, double t, const GridPolicy& policy = {},
                             bool with_gradient = false);

struct GradL1Scaling {
    std::vector<double> times;
    std::vector<double> norms;
    LineFit fit;
};

/// Log-log slope of ‖∂_k g_t‖_{L¹} over the given times (one decade or more).
GradL1Scaling ou_grad_l1_scaling_check(const OUFracParams& params, int axis, const std::vector<double>& times,
                                       const GridPolicy& policy = {});

void write_kernel_csv(const GriddedKernel& kernel, std::ostream& out, std::size_t stride = 1);
nlohmann::json kernel_metadata(const GriddedKernel& kernel);

}  // namespace mehler
