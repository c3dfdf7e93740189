#pragma once

#include <Eigen/Dense>

namespace mehler {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// e^{A} by scaling and squaring with Padé approximants. Verified through
/// e^{A}e^{-A} = I; throws NumericalFailure when the residual exceeds 1e-12
/// relative to the product's scale.
Matrix matrix_exponential(const Matrix& a);

/// Symmetric square root via eigendecomposition. Rejects non-symmetric or
/// non-positive-definite input with InvalidArgument.
Matrix spd_sqrt(const Matrix& q);

bool is_symmetric(const Matrix& q, double tol = 1e-12);
bool is_positive_definite(const Matrix& q);

}  // namespace mehler
