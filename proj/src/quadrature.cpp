#include "agamp/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "agamp/errors.hpp"

namespace agamp {

QuadratureRule QuadratureRule::gauss_hermite(int order) {
    if (order < 1) throw DomainError("gauss_hermite: order must be >= 1");

    // Golub-Welsch on the Hermite Jacobi matrix: zero diagonal,
    // off-diagonal sqrt(k/2).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(static_cast<double>(k) / 2.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("gauss_hermite: eigenvalue solve failed");
    }

    QuadratureRule rule;
    rule.order = order;
    rule.nodes = solver.eigenvalues();  // ascending
    rule.weights.resize(order);
    // Weights via the orthonormal-polynomial recurrence, w = 1 / sum_j
    // p_j(x)^2. Eigenvector first components lose all relative accuracy once
    // a weight underflows past ~1e-30, and the mode-centered evaluation
    // multiplies extreme-node weights back up by exp(x^2).
    for (int k = 0; k < order; ++k) {
        const double x = rule.nodes[k];
        double prev = 0.0;
        double cur = std::pow(M_PI, -0.25);  // orthonormal p_0
        double sum_sq = cur * cur;
        for (int j = 0; j < order - 1; ++j) {
            const double b_j = std::sqrt(static_cast<double>(j) / 2.0);
            const double b_next = std::sqrt(static_cast<double>(j + 1) / 2.0);
            const double next = (x * cur - b_j * prev) / b_next;
            prev = cur;
            cur = next;
            sum_sq += cur * cur;
        }
        rule.weights[k] = 1.0 / sum_sq;
    }

    // Symmetrize node/weight pairs exactly; the solver leaves ~1e-16 skew.
    for (int k = 0; k < order / 2; ++k) {
        const int j = order - 1 - k;
        const double mag = 0.5 * (rule.nodes[j] - rule.nodes[k]);
        rule.nodes[k] = -mag;
        rule.nodes[j] = mag;
        const double w = 0.5 * (rule.weights[k] + rule.weights[j]);
        rule.weights[k] = w;
        rule.weights[j] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;

    rule.log_weights = rule.weights.array().log();
    return rule;
}

const QuadratureRule& cached_gauss_hermite(int order) {
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) {
        it = cache.emplace(order, QuadratureRule::gauss_hermite(order)).first;
    }
    return it->second;
}

}  // namespace agamp
