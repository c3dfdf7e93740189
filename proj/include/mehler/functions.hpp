#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mehler/support/linalg.hpp"

namespace mehler {

/// amplitude · cos(frequency · x + phase)
struct TrigTerm {
    double amplitude = 1.0;
    Vector frequency;
    double phase = 0.0;
};

/// constant + Σ terms
struct TrigSpectrum {
    double constant = 0.0;
    std::vector<TrigTerm> terms;
};

/// One-dimensional profile φ used by ridge functions x ↦ φ(w · x).
class RidgeProfile {
public:
    virtual ~RidgeProfile() = default;
    [[nodiscard]] virtual double value(double u) const = 0;
    [[nodiscard]] virtual double derivative(double u) const = 0;
    /// Points near which the profile changes abruptly (quadrature breakpoints).
    [[nodiscard]] virtual std::vector<double> breakpoints() const { return {}; }
    /// sup |φ|; +inf when unbounded.
    [[nodiscard]] virtual double bound() const = 0;
    /// Profile of φ'.
    [[nodiscard]] virtual std::shared_ptr<const RidgeProfile> differentiated() const = 0;
};

struct Ridge {
    std::shared_ptr<const RidgeProfile> profile;
    Vector direction;
};

/// Immutable scalar test function on ℝᴺ with a structured representation.
class TestFunction {
public:
    TestFunction(std::string name, int dim, TrigSpectrum spectrum);
    TestFunction(std::string name, Ridge ridge);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] double value(const Vector& x) const;
    [[nodiscard]] double operator()(const Vector& x) const { return value(x); }
    [[nodiscard]] Vector gradient(const Vector& x) const;
    /// sup |f|; +inf when unbounded.
    [[nodiscard]] double bound() const noexcept { return bound_; }
    [[nodiscard]] bool bounded() const noexcept;

    [[nodiscard]] const TrigSpectrum* spectrum() const noexcept { return std::get_if<TrigSpectrum>(&rep_); }
    [[nodiscard]] const Ridge* ridge() const noexcept { return std::get_if<Ridge>(&rep_); }

    /// x ↦ ∂f/∂d (x).
    [[nodiscard]] TestFunction directional_derivative(const Vector& d) const;

private:
    std::string name_;
    int dim_ = 0;
    double bound_ = 0.0;
    std::variant<TrigSpectrum, Ridge> rep_;
};

namespace functions {

TestFunction constant(int dim, double c);
TestFunction cosine(const Vector& frequency, double amplitude = 1.0, double phase = 0.0);
TestFunction trig_polynomial(int dim, double constant, std::vector<TrigTerm> terms);
/// Σ_{k<terms} 2^{-γk} cos(2^k w·x)
TestFunction weierstrass(const Vector& direction, double gamma, int terms = 13);
/// erf((w·x - offset) / width)
TestFunction smoothed_step(const Vector& direction, double width, double offset = 0.0);
/// intercept + w·x
TestFunction affine(const Vector& direction, double intercept = 0.0);
/// (w·x)^degree
TestFunction monomial(const Vector& direction, int degree);
/// u log|u| with |u| replaced by sqrt(u² + width²), u = w·x
TestFunction mollified_xlogx(const Vector& direction, double width);
/// exp(1 - 1/(1 - (u/radius)²)) on |u| < radius, u = w·x
TestFunction bump(const Vector& direction, double radius);
/// Piecewise-linear profile through (nodes, values), constant outside.
TestFunction tabulated(const Vector& direction, std::vector<double> nodes, std::vector<double> values);
/// Reads a two-column CSV (u, value) with an optional header row.
TestFunction tabulated_csv(const Vector& direction, const std::string& path);

}  // namespace functions

}  // namespace mehler
