#include "agamp/lasso.hpp"

#include <cmath>
#include <limits>

namespace agamp {

namespace {

inline double soft_threshold(double v, double cut) {
    if (v > cut) return v - cut;
    if (v < -cut) return v + cut;
    return 0.0;
}

double lasso_objective(const VectorXd& residual, const VectorXd& x, double reg) {
    return 0.5 * residual.squaredNorm() + reg * x.lpNorm<1>();
}

}  // namespace

LassoSolution lasso_solve(const RowMatrixXd& a_matrix, const VectorXd& y, double reg_weight,
                          const LassoConfig& config, const VectorXd* warm_start) {
    config.validate();
    if (!(reg_weight > 0.0)) throw DomainError("lasso_solve: reg_weight must be > 0");
    const Eigen::Index n = a_matrix.cols();
    if (y.size() != a_matrix.rows()) throw DomainError("lasso_solve: dimension mismatch");

    LassoSolution sol;
    sol.x = (warm_start != nullptr) ? *warm_start : VectorXd::Zero(n);
    const Eigen::MatrixXd a = a_matrix;  // column-major copy for the column sweeps
    VectorXd residual = y - a * sol.x;
    VectorXd col_sq(n);
    for (Eigen::Index j = 0; j < n; ++j) col_sq[j] = a.col(j).squaredNorm();

    double prev_objective = lasso_objective(residual, sol.x, reg_weight);
    for (int sweep = 0; sweep < config.max_iters; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (col_sq[j] == 0.0) continue;
            const double old = sol.x[j];
            const double rho = a.col(j).dot(residual) + col_sq[j] * old;
            const double updated = soft_threshold(rho, reg_weight) / col_sq[j];
            if (updated != old) {
                residual -= a.col(j) * (updated - old);
                sol.x[j] = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        sol.sweeps = sweep + 1;

        const double objective = lasso_objective(residual, sol.x, reg_weight);
        if (objective > prev_objective + 1e-10 * std::max(1.0, prev_objective)) {
            throw std::runtime_error("lasso_solve: objective increased across a sweep");
        }
        prev_objective = objective;

        if (max_change < config.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.objective = prev_objective;
    return sol;
}

LassoTuneResult lasso_oracle_tune(const ProblemInstance& instance, const LassoConfig& config) {
    config.validate();
    const double reg_max = (instance.a_matrix.transpose() * instance.y_obs).cwiseAbs().maxCoeff();
    if (!(reg_max > 0.0)) {
        // A'y = 0: every weight gives the zero solution.
        LassoTuneResult out;
        out.x = VectorXd::Zero(instance.n());
        out.reg_weight = 1.0;
        out.mse = instance.x_true.squaredNorm() / static_cast<double>(instance.n());
        return out;
    }

    const int grid = config.grid_size;
    const double log_lo = std::log(config.grid_lo);
    const double log_hi = std::log(config.grid_hi);

    LassoTuneResult best;
    best.mse = std::numeric_limits<double>::infinity();
    VectorXd warm = VectorXd::Zero(instance.n());
    // Descend from the strongest weight so each solve warm-starts the next.
    for (int g = grid - 1; g >= 0; --g) {
        const double frac =
            (grid == 1) ? log_hi : log_lo + (log_hi - log_lo) * g / static_cast<double>(grid - 1);
        const double reg = std::exp(frac) * reg_max;
        const LassoSolution sol =
            lasso_solve(instance.a_matrix, instance.y_obs, reg, config, &warm);
        warm = sol.x;
        if (!sol.converged) best.all_converged = false;
        const double mse =
            (sol.x - instance.x_true).squaredNorm() / static_cast<double>(instance.n());
        if (mse < best.mse) {
            best.mse = mse;
            best.x = sol.x;
            best.reg_weight = reg;
        }
    }
    return best;
}

}  // namespace agamp
