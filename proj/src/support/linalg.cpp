#include "mehler/support/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "mehler/support/errors.hpp"

namespace mehler {

Matrix matrix_exponential(const Matrix& a) {
    require(a.rows() == a.cols(), "matrix exponential needs a square matrix");
    Matrix e = a.exp();
    Matrix back = (-a).exp();
    const double scale = std::max(1.0, e.norm() * back.norm());
    const double residual = (e * back - Matrix::Identity(a.rows(), a.cols())).norm();
    if (residual > 1e-12 * scale * static_cast<double>(a.rows())) {
        throw NumericalFailure("matrix exponential residual " + std::to_string(residual));
    }
    return e;
}

bool is_symmetric(const Matrix& q, double tol) {
    if (q.rows() != q.cols()) return false;
    return (q - q.transpose()).norm() <= tol * std::max(1.0, q.norm());
}

bool is_positive_definite(const Matrix& q) {
    if (!is_symmetric(q)) return false;
    Eigen::LLT<Matrix> llt(q);
    return llt.info() == Eigen::Success;
}

Matrix spd_sqrt(const Matrix& q) {
    require(is_symmetric(q), "matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(q);
    require(solver.info() == Eigen::Success, "eigendecomposition failed");
    require(solver.eigenvalues().minCoeff() > 0.0, "matrix must be positive definite");
    Matrix root = solver.eigenvectors() * solver.eigenvalues().cwiseSqrt().asDiagonal() *
                  solver.eigenvectors().transpose();
    const double residual = (root * root - q).norm();
    if (residual > 1e-12 * std::max(1.0, q.norm())) {
        throw NumericalFailure("matrix square root residual " + std::to_string(residual));
    }
    return root;
}

}  // namespace mehler
