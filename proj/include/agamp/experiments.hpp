#pragma once

#include <string>
#include <vector>

#include "agamp/adaptation.hpp"
#include "agamp/gamp.hpp"
#include "agamp/lasso.hpp"
#include "agamp/state_evolution.hpp"
#include "agamp/types.hpp"

namespace agamp {

// Declarative description of one experiment; presets fill in the defaults for
// each figure-style sweep and a JSON config file (plus CLI flags) can
// override any field. See SCHEMA.md for the file format.
struct ExperimentConfig {
    std::string experiment = "single";  // fig2a | fig2b | fig3 | single | se
    Eigen::Index n = 400;
    double mn_ratio = 0.75;             // fixed m/n where the sweep is over sigma^2
    std::string sweep_name = "mn_ratio";  // "mn_ratio" or "sigma_sq"
    std::vector<double> sweep;          // sweep grid (single/se use mn_ratio only)

    InputParams lambda_x{0.2, 5.0};
    OutputParams lambda_z = AwgnParams{0.1};

    int trials = 10;
    std::uint64_t seed_base = 1;
    std::string out_dir = ".";
    int workers = 1;

    // "oracle", "em" (input prior only), or "em+ml" (prior + output channel).
    std::string adaptation = "em";
    bool with_lasso = false;
    bool with_se = true;

    int max_iters = 200;
    double stop_tol = 1e-8;
    int se_samples = 100000;
    int se_iters = 50;
    std::uint64_t se_seed = 20240601;

    EmInputStrategy em;
    MlOutputStrategy ml;
    LassoConfig lasso;

    void validate() const;
    Eigen::Index m_for_ratio(double ratio) const;
};

// Figure presets with the experiment's published parameter values; `single`
// and `se` reuse the fig2a point at m/n = 0.75.
ExperimentConfig preset_config(const std::string& experiment);

// Load a JSON config file; starts from preset_config(file["experiment"]) and
// overrides any present key.
ExperimentConfig load_config_file(const std::string& path);

// Strategies and initial parameter guesses implied by the config. Adaptive
// Gauss-Bernoulli runs start from rho = 0.5 and sigma_x^2 = var(y) * m/n;
// adaptive LNP runs know the prior at t = 0 and start lambda_z at the box
// center.
struct RunSetup {
    GampConfig gamp;
    InputParams initial_x;
    OutputParams initial_z;
};
RunSetup make_run_setup(const ExperimentConfig& config, const ProblemInstance& instance,
                        bool oracle);

struct MethodSummary {
    std::string method;  // adaptive | oracle | lasso | se
    int trials = 0;
    int diverged = 0;
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    std::vector<double> per_trial_mse;  // non-divergent trials, trial order
    double rho_hat_mean = std::numeric_limits<double>::quiet_NaN();
    double sigma_x_sq_hat_mean = std::numeric_limits<double>::quiet_NaN();
    VectorXd lambda_z_hat_mean;  // empty when not applicable
};

struct SweepPointResult {
    double sweep_value = 0.0;
    Eigen::Index m = 0;
    std::vector<MethodSummary> methods;

    const MethodSummary& method(const std::string& name) const;
};

struct SweepResult {
    std::vector<SweepPointResult> points;
    std::string csv_path;
};

// Full sweep: per point and trial runs adaptive GAMP, oracle GAMP, optionally
// oracle-tuned LASSO, plus one SE prediction per point. Writes one CSV row
// per (sweep point, method). Deterministic for a fixed config, including the
// worker count.
SweepResult run_sweep(const ExperimentConfig& config);

struct SingleRunOutput {
    GampResult result;
    std::string trajectory_csv;
    std::string summary_json;
};
SingleRunOutput run_single(const ExperimentConfig& config, bool oracle);

struct SeRunOutput {
    SeRunResult result;
    std::string trajectory_csv;
    std::string summary_json;
};
SeRunOutput run_se_experiment(const ExperimentConfig& config);

struct DiagnoseOutput {
    std::string pl_csv;
    std::string parameter_csv;
    std::string summary_text;
    double pl_within_3_fraction = 0.0;
};
DiagnoseOutput run_diagnose(const ExperimentConfig& config);

// 10 log10(x); helper for the dB columns.
double to_db(double x);

}  // namespace agamp
