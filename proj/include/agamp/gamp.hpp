#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "agamp/adaptation.hpp"
#include "agamp/channels.hpp"
#include "agamp/types.hpp"

namespace agamp {

// All per-iteration vectors and scalars of the adaptive GAMP loop.
struct GampState {
    VectorXd x_hat;   // n
    double tau_x = 0.0;
    VectorXd s;       // m
    VectorXd p;       // m
    double tau_p = 0.0;
    VectorXd r;       // n
    double tau_r = 0.0;
    VectorXd z_hat;   // m
    double tau_s = 0.0;
    InputParams lambda_x_hat;
    OutputParams lambda_z_hat = AwgnParams{0.0};
    int iter = 0;
};

struct GampConfig {
    int max_iters = 200;
    double stop_tol = 1e-8;          // relative change in x_hat
    double variance_floor = 1e-12;
    AdaptationStrategy input_adaptation = OracleStrategy{};
    AdaptationStrategy output_adaptation = OracleStrategy{};
    bool record_trajectory = false;
    bool record_populations = false;  // keep per-iteration r and x_hat copies
    // Reserved extension point; the loop implements the undamped recursion and
    // rejects any other value.
    double damping = 1.0;

    void validate() const {
        if (max_iters < 1) throw ConfigError("GampConfig: max_iters must be >= 1");
        if (!(stop_tol >= 0.0)) throw ConfigError("GampConfig: stop_tol must be >= 0");
        if (!(variance_floor > 0.0)) throw ConfigError("GampConfig: variance_floor must be > 0");
        if (damping != 1.0) throw ConfigError("GampConfig: damping is reserved and must be 1.0");
        if (std::holds_alternative<MlOutputStrategy>(input_adaptation)) {
            throw ConfigError("GampConfig: MlOutput cannot adapt the input prior");
        }
        if (std::holds_alternative<EmInputStrategy>(output_adaptation)) {
            throw ConfigError("GampConfig: EmInput cannot adapt the output channel");
        }
    }
};

struct GampIterationRecord {
    int iter = 0;
    double tau_p = 0.0;
    double tau_s = 0.0;
    double tau_r = 0.0;
    double tau_x = 0.0;
    InputParams lambda_x_hat;
    OutputParams lambda_z_hat = AwgnParams{0.0};
    double mse = std::numeric_limits<double>::quiet_NaN();  // vs x_true when known
    double rel_change = 0.0;
    std::vector<std::string> steps;  // executed step names, in order
    VectorXd r_copy;                 // populated when record_populations is set
    VectorXd x_hat_copy;
};

struct GampResult {
    GampState state;
    std::vector<GampIterationRecord> trajectory;  // empty unless recording
    double mse = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
};

// Shared read-only problem view for one run.
struct GampProblem {
    const RowMatrixXd& a_matrix;
    const VectorXd& y;
    const InputChannel& input_channel;
    const OutputChannel& output_channel;
    double frob_sq;              // cached ||A||_F^2
    const VectorXd* x_true = nullptr;  // optional, for MSE tracking
    // Var(Z) used by the simplified ML output adaptation. gamp_run_problem
    // fills it from the initial tau_x when left at zero.
    double ml_var_z = 0.0;

    GampProblem(const RowMatrixXd& a, const VectorXd& y_obs, const InputChannel& in,
                const OutputChannel& out, const VectorXd* truth = nullptr)
        : a_matrix(a),
          y(y_obs),
          input_channel(in),
          output_channel(out),
          frob_sq(a.squaredNorm()),
          x_true(truth) {}
};

// x_hat = prior mean (zero for the zero-mean Gauss-Bernoulli family),
// tau_x = prior variance, s = 0.
GampState gamp_init(Eigen::Index m, Eigen::Index n, const InputParams& initial_x,
                    const OutputParams& initial_z, const GampConfig& config);

// One full sweep in the fixed step order: tau_p, p, H_z, z_hat, s, tau_s,
// tau_r, r, H_x, x_hat, tau_x. Throws DivergenceError naming the step when a
// vector goes non-finite or tau_s turns non-positive.
GampState gamp_iterate(const GampState& state, const GampProblem& problem,
                       const GampConfig& config, GampIterationRecord* record = nullptr);

// Full run: iterate until the relative change in x_hat drops below stop_tol
// or max_iters is hit.
GampResult gamp_run(const ProblemInstance& instance, const GampConfig& config,
                    const InputParams& initial_x, const OutputParams& initial_z);

// Same, but with caller-supplied channels (used by tests that exercise custom
// matrices without a generated instance).
GampResult gamp_run_problem(const GampProblem& problem, const GampConfig& config,
                            const InputParams& initial_x, const OutputParams& initial_z);

void write_trajectory_csv(const std::vector<GampIterationRecord>& trajectory,
                          const std::string& path);

}  // namespace agamp
