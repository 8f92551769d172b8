#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <variant>

#include "agamp/errors.hpp"

namespace agamp {

// A is stored dense, row-major, 64-bit; all experiment sizes fit in memory.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::VectorXd;

// Gauss-Bernoulli prior parameters: P(x != 0) = rho, nonzero x ~ N(0, sigma_x_sq).
struct InputParams {
    double rho = 0.0;
    double sigma_x_sq = 1.0;

    void validate() const {
        if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("InputParams: rho must be in [0,1]");
        if (!(sigma_x_sq > 0.0)) throw DomainError("InputParams: sigma_x_sq must be > 0");
    }
    double prior_variance() const { return rho * sigma_x_sq; }
};

struct AwgnParams {
    double sigma_sq = 0.0;  // >= 0; 0 means noiseless

    void validate() const {
        if (!(sigma_sq >= 0.0)) throw DomainError("AwgnParams: sigma_sq must be >= 0");
    }
};

// Poisson channel with log-rate lambda_z . psi(z), psi(z) = (1, u(z), ..., u(z)^{r-1}),
// u the logistic sigmoid. The coefficient count r is fixed at construction.
struct PoissonLnpParams {
    VectorXd lambda_z;

    void validate() const {
        if (lambda_z.size() < 1) throw DomainError("PoissonLnpParams: empty coefficient vector");
        if (!lambda_z.allFinite()) throw DomainError("PoissonLnpParams: non-finite coefficients");
    }
};

using OutputParams = std::variant<AwgnParams, PoissonLnpParams>;

inline void validate(const OutputParams& params) {
    std::visit([](const auto& p) { p.validate(); }, params);
}

inline bool is_awgn(const OutputParams& p) { return std::holds_alternative<AwgnParams>(p); }
inline bool is_poisson_lnp(const OutputParams& p) {
    return std::holds_alternative<PoissonLnpParams>(p);
}

// One synthetic realization of the measurement cascade, plus the ground truth
// it was drawn from.
struct ProblemInstance {
    RowMatrixXd a_matrix;       // m x n
    VectorXd x_true;            // n
    VectorXd z_true;            // m, equals a_matrix * x_true
    VectorXd w_noise;           // m, channel disturbance (see model docs)
    VectorXd y_obs;             // m
    InputParams lambda_x_true;
    OutputParams lambda_z_true;
    std::int64_t seed = 0;

    Eigen::Index m() const { return a_matrix.rows(); }
    Eigen::Index n() const { return a_matrix.cols(); }
};

// Largest-magnitude difference between two parameter vectors of equal length;
// used for the lambda_z consistency reports.
double inf_norm_diff(const VectorXd& a, const VectorXd& b);

std::string describe(const OutputParams& params);

}  // namespace agamp
