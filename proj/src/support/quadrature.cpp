#include "mehler/support/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <numbers>

namespace mehler::quad {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come from
// the first eigenvector components scaled by the total mass.
Rule golub_welsch(const Eigen::VectorXd& off_diagonal, double mass) {
    const auto n = off_diagonal.size() + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        jacobi(i, i + 1) = off_diagonal(i);
        jacobi(i + 1, i) = off_diagonal(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    Rule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v = solver.eigenvectors()(0, i);
        rule.weights[i] = mass * v * v;
    }
    return rule;
}

}  // namespace

Rule gauss_legendre(std::size_t n) {
    require(n >= 1, "Gauss-Legendre order must be positive");
    if (n == 1) return {{0.0}, {2.0}};
    Eigen::VectorXd beta(n - 1);
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        beta(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    return golub_welsch(beta, 2.0);
}

Rule gauss_hermite(std::size_t n) {
    require(n >= 1, "Gauss-Hermite order must be positive");
    if (n == 1) return {{0.0}, {1.0}};
    Eigen::VectorXd beta(n - 1);
    for (std::size_t k = 1; k < n; ++k) beta(k - 1) = std::sqrt(static_cast<double>(k));
    return golub_welsch(beta, 1.0);
}

}  // namespace mehler::quad
