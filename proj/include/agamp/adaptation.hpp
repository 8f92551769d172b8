#pragma once

#include <cmath>
#include <variant>
#include <vector>

#include "agamp/channels.hpp"
#include "agamp/types.hpp"

namespace agamp {

// Fixed adaptation: output the configured parameters at every iteration,
// independent of the data (the oracle scenario sets these to the truth).
struct OracleStrategy {
    InputParams lambda_x;
    OutputParams lambda_z = AwgnParams{0.0};
};

// Run the closed-form spike-slab EM updates to convergence.
struct EmInputStrategy {
    int max_em_iters = 200;
    double tol = 1e-6;  // relative change in both parameters

    void validate() const {
        if (max_em_iters < 1) throw ConfigError("EmInputStrategy: max_em_iters must be >= 1");
        if (!(tol > 0.0)) throw ConfigError("EmInputStrategy: tol must be > 0");
    }
};

// Projected gradient ascent with backtracking on the marginal likelihood of y.
// The box Lambda_z is per-coordinate (a single entry broadcasts). With a
// symmetric Z marginal the sigmoid-polynomial family is invariant under
// u -> 1-u, so the box must cut away the mirrored optimum for the maximizer
// to be unique; constraining the linear coefficient to be nonnegative
// (monotone increasing nonlinearity) does that.
struct MlOutputStrategy {
    int max_ascent_iters = 500;
    double step_init = 0.1;
    double tol = 1e-5;  // gradient infinity-norm
    std::vector<double> box_lo{-20.0};
    std::vector<double> box_hi{20.0};
    // The objective is evaluated once per unique count, so a high-order rule
    // costs nothing here; small counts need the resolution (see channel tests).
    int quad_order = 201;

    double lo(Eigen::Index k) const {
        return box_lo[box_lo.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    }
    double hi(Eigen::Index k) const {
        return box_hi[box_hi.size() == 1 ? 0 : static_cast<std::size_t>(k)];
    }

    void validate() const {
        if (max_ascent_iters < 0) throw ConfigError("MlOutputStrategy: max_ascent_iters must be >= 0");
        if (!(step_init > 0.0)) throw ConfigError("MlOutputStrategy: step_init must be > 0");
        if (!(tol > 0.0)) throw ConfigError("MlOutputStrategy: tol must be > 0");
        if (box_lo.empty() || box_hi.empty()) {
            throw ConfigError("MlOutputStrategy: box bounds must be nonempty");
        }
        const std::size_t dims = std::max(box_lo.size(), box_hi.size());
        for (std::size_t k = 0; k < dims; ++k) {
            const double lo_k = box_lo[box_lo.size() == 1 ? 0 : k];
            const double hi_k = box_hi[box_hi.size() == 1 ? 0 : k];
            if (!(lo_k < hi_k) || !std::isfinite(lo_k) || !std::isfinite(hi_k)) {
                throw ConfigError("MlOutputStrategy: box bounds must be finite with lo < hi");
            }
        }
        if (quad_order < 1) throw ConfigError("MlOutputStrategy: quad_order must be >= 1");
    }
};

using AdaptationStrategy = std::variant<OracleStrategy, EmInputStrategy, MlOutputStrategy>;

struct EmResult {
    InputParams params;
    bool degenerate = false;  // all responsibilities vanished; rho pinned to 0
    int iters = 0;
    // Objective (1/n) sum_j log p_R(r_j | params, tau_r) after each EM
    // iteration; monotone nondecreasing by construction, asserted in code.
    std::vector<double> objectives;
};

struct MlResult {
    OutputParams params;
    int iters = 0;
    double grad_inf_norm = 0.0;
    // Objective after every accepted ascent step (index 0 is the start).
    std::vector<double> objectives;
};

// EM for the Gauss-Bernoulli prior observed through R = X + N(0, tau_r).
// E-step: slab responsibilities and conditional moments from the exact
// posterior; M-step: rho <- mean responsibility, sigma_x_sq <- responsibility-
// weighted slab second moment. Iterates until the relative change in both
// parameters drops below tol.
EmResult adapt_input_em(const VectorXd& r, double tau_r, const InputParams& prev,
                        const EmInputStrategy& strategy);

// Maximizes (1/m) sum_i log p_Y(y_i | lambda_z) with Z ~ N(0, var_z) over the
// box, starting from prev. Only the Poisson-LNP family has free output
// parameters. Counts are grouped by unique value of y, so each objective
// evaluation costs O(#unique * quad order).
MlResult adapt_output_ml(const VectorXd& p, const VectorXd& y, double var_z,
                         const OutputParams& prev, const MlOutputStrategy& strategy,
                         const QuadratureRule& quad);

inline std::pair<InputParams, OutputParams> adapt_oracle(const OracleStrategy& strategy) {
    return {strategy.lambda_x, strategy.lambda_z};
}

}  // namespace agamp
