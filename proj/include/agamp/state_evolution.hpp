#pragma once

#include <Eigen/Core>
#include <vector>

#include "agamp/adaptation.hpp"
#include "agamp/channels.hpp"
#include "agamp/types.hpp"

namespace agamp {

struct MonteCarloConfig {
    int samples = 100000;
    std::uint64_t seed = 20240601;

    void validate() const {
        if (samples < 1000) throw ConfigError("MonteCarloConfig: need at least 1000 samples");
    }
};

// Deterministic parameter set of the scalar state evolution recursion. k_x and
// k_p are uncentered 2x2 second-moment matrices of (X, X_hat) and (Z, P); the
// prior and the estimates are zero mean, so these coincide with covariances.
struct SeState {
    double tau_x_bar = 0.0;
    Eigen::Matrix2d k_x = Eigen::Matrix2d::Zero();
    double tau_p_bar = 0.0;
    Eigen::Matrix2d k_p = Eigen::Matrix2d::Zero();
    double tau_r_bar = 0.0;
    double xi_r = 0.0;
    double alpha_r = 1.0;
    InputParams lambda_x_bar;
    OutputParams lambda_z_bar = AwgnParams{0.0};
    int iter = 0;
    // Monte Carlo standard error of the squared-error average behind
    // predicted_mse(); zero before the first step.
    double mse_stderr = 0.0;

    // E[(X - X_hat)^2] as the (1,1) - 2(1,2) + (2,2) contraction of k_x.
    double predicted_mse() const {
        return std::max(k_x(0, 0) - 2.0 * k_x(0, 1) + k_x(1, 1), 0.0);
    }
};

// Everything a recursion step needs besides the evolving state.
struct SeProblem {
    const InputChannel& input_channel;
    const OutputChannel& output_channel;
    InputParams lambda_x_true;
    OutputParams lambda_z_true;
    double beta = 1.0;  // measurement ratio n/m
    AdaptationStrategy input_adaptation = OracleStrategy{};
    AdaptationStrategy output_adaptation = OracleStrategy{};
    // Initial values of the parameter-estimate track (adaptive runs start
    // from a guess, oracle runs from the truth).
    InputParams initial_lambda_x;
    OutputParams initial_lambda_z = AwgnParams{0.0};
    double tau_x0 = 0.0;      // GAMP's initial tau_x; defaults to the true prior variance
    double ml_var_z = 0.0;    // Var(Z) for ML adaptation; defaults to beta * tau_x0
    double variance_floor = 1e-12;
};

SeState se_init(const InputParams& lambda_x_true, double beta, double tau_x0);

// One recursion sweep: output half (tau_p, K_p, lambda_z, tau_r) then input
// half (lambda_x, tau_x, K_x), with expectations evaluated over seeded Monte
// Carlo populations (the adaptation functionals run on the sampled
// populations through the same EM/ML code the engine uses).
SeState se_step(const SeState& state, const SeProblem& problem, const MonteCarloConfig& mc);

struct SeRunConfig {
    int max_iters = 50;
    bool early_stop = true;       // fixed-point detection
    double fp_tol = 1e-4;         // relative change in predicted MSE
    int fp_consecutive = 3;

    void validate() const {
        if (max_iters < 1) throw ConfigError("SeRunConfig: max_iters must be >= 1");
    }
};

struct SeRunResult {
    std::vector<SeState> states;          // state after each completed iteration
    std::vector<double> predicted_mse;    // aligned with states
    std::vector<double> mse_stderr;
    bool reached_fixed_point = false;
};

SeRunResult se_run(const SeProblem& problem, const SeRunConfig& run, const MonteCarloConfig& mc);

// General-form output-half quantities evaluated at a post-step state:
// tau_r = -1/E[dGs/dp], xi_r = tau_r^2 E[Gs^2], alpha_r = tau_r E[dGs/dz].
// AWGN channels evaluate in closed form given k_p; anything else falls back
// to Monte Carlo with common-random-number coupling for the z-derivative.
struct SeGeneralCheck {
    double tau_r = 0.0;
    double xi_r = 0.0;
    double alpha_r = 0.0;
    bool analytic = false;
};

SeGeneralCheck se_general_output_params(const SeState& state, const SeProblem& problem,
                                        const MonteCarloConfig& mc, double fd_step = 0.1);

void write_se_trajectory_csv(const SeRunResult& result, const std::string& path);

}  // namespace agamp
