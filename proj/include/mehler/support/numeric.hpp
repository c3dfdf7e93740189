#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mehler {

/// Value with an error estimate (quadrature error or Monte-Carlo standard error).
struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// Pairwise summation; bit-stable for a fixed input order.
double pairwise_sum(std::span<const double> values);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// Root-mean-square residual of the fit.
    double residual = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of log(y) against log(x).
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

std::vector<double> logspace(double lo, double hi, std::size_t n);
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace mehler
