#pragma once

#include <Eigen/Core>

namespace agamp {

// Gauss-Hermite rule for the physicists' weight: sum_k w_k f(x_k) approximates
// integral of exp(-x^2) f(x) over the real line, so the weights sum to
// sqrt(pi). Nodes are symmetric about 0 (enforced exactly after the
// eigenvalue solve). For E[f(Z)] with Z ~ N(mu, var):
//   E[f(Z)] = (1/sqrt(pi)) sum_k w_k f(mu + sqrt(2 var) x_k).
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    Eigen::VectorXd log_weights;
    int order = 0;

    static QuadratureRule gauss_hermite(int order);
};

// Process-wide cache keyed by order; the 200x200 eigensolve is not something
// to redo inside an iteration loop. Thread-safe.
const QuadratureRule& cached_gauss_hermite(int order);

}  // namespace agamp
