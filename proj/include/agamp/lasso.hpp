#pragma once

#include "agamp/types.hpp"

namespace agamp {

struct LassoConfig {
    int max_iters = 2000;  // full coordinate sweeps
    double tol = 1e-8;     // max coordinate change per sweep
    int grid_size = 30;    // log-spaced weights in [grid_lo, grid_hi] * ||A'y||_inf
    double grid_lo = 1e-3;
    double grid_hi = 1.0;

    void validate() const {
        if (max_iters < 1) throw ConfigError("LassoConfig: max_iters must be >= 1");
        if (!(tol > 0.0)) throw ConfigError("LassoConfig: tol must be > 0");
        if (grid_size < 1) throw ConfigError("LassoConfig: grid must be nonempty");
        if (!(grid_lo > 0.0 && grid_hi >= grid_lo)) {
            throw ConfigError("LassoConfig: grid bounds must satisfy 0 < lo <= hi");
        }
    }
};

struct LassoSolution {
    VectorXd x;
    bool converged = false;
    int sweeps = 0;
    double objective = 0.0;  // 0.5 ||y - Ax||^2 + reg ||x||_1
};

// Cyclic coordinate descent for 0.5 ||y - Ax||^2 + reg_weight ||x||_1.
// Optionally warm-started; the objective is monotone across sweeps (checked).
LassoSolution lasso_solve(const RowMatrixXd& a_matrix, const VectorXd& y, double reg_weight,
                          const LassoConfig& config, const VectorXd* warm_start = nullptr);

struct LassoTuneResult {
    VectorXd x;
    double reg_weight = 0.0;
    double mse = 0.0;
    bool all_converged = true;
};

// Solves along a descending regularization path (warm starts) and returns the
// minimum-MSE solution against the instance's ground truth.
LassoTuneResult lasso_oracle_tune(const ProblemInstance& instance, const LassoConfig& config);

}  // namespace agamp
