#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "agamp/channels.hpp"
#include "agamp/gamp.hpp"
#include "agamp/rng.hpp"
#include "agamp/state_evolution.hpp"
#include "agamp/types.hpp"

namespace agamp {

// Scalar test function over one population tuple, with its declared
// pseudo-Lipschitz (order 2) constant.
struct TestFunction {
    std::string name;
    std::function<double(const Eigen::RowVectorXd&)> phi;
    double lipschitz = 1.0;
};

// Collection of order-2 test functions over tuples of fixed arity. The
// constructor samples random point pairs and rejects any function whose
// increments violate |phi(a)-phi(b)| <= L (1 + |a| + |b|) |a-b|.
class TestFunctionSuite {
  public:
    TestFunctionSuite(std::vector<TestFunction> functions, int arity,
                      std::uint64_t check_seed = 7777);

    const std::vector<TestFunction>& functions() const { return functions_; }
    int arity() const { return arity_; }

    // Suite over theta_x = (x, r, x_hat) tuples: squared error, second
    // moments, the cross moment and a smoothed support detector.
    static TestFunctionSuite input_suite();
    // Suite over theta_z = (z, z_hat, y, p) tuples.
    static TestFunctionSuite output_suite();

  private:
    std::vector<TestFunction> functions_;
    int arity_;
};

struct PlComparison {
    std::string name;
    double empirical_mean = 0.0;
    double predicted_mean = 0.0;
    double z_score = 0.0;
};

using TupleSampler = std::function<void(CounterRng&, Eigen::RowVectorXd&)>;

// Compares per-function empirical averages of two populations (rows are
// tuples). The z-score combines the Monte Carlo standard errors of both
// sides.
std::vector<PlComparison> pl2_compare(const Eigen::MatrixXd& empirical,
                                      const Eigen::MatrixXd& predicted,
                                      const TestFunctionSuite& suite);

// Same, with the predicted side drawn from a scalar-distribution sampler.
std::vector<PlComparison> pl2_compare(const Eigen::MatrixXd& empirical, const TupleSampler& sampler,
                                      const TestFunctionSuite& suite, int mc_samples,
                                      std::uint64_t seed = 99);

// Sampler of the limiting theta_x tuple at one SE iteration:
// X ~ P_X(lambda_x_true), R = X + N(0, tau_r_bar), X_hat = posterior mean at
// lambda_x_bar.
TupleSampler make_theta_x_sampler(const SeState& state, const InputChannel& channel,
                                  const InputParams& lambda_x_true);

struct ParameterErrorRow {
    int iter = 0;
    double rho_err = 0.0;            // |rho_hat - rho*|
    double sigma_x_sq_rel_err = 0.0; // |sigma_hat - sigma*| / sigma*
    double lambda_z_inf_err = 0.0;   // max-abs coefficient error
};

// Per-iteration parameter errors of an adaptive trajectory against the truth.
std::vector<ParameterErrorRow> parameter_consistency_report(
    const std::vector<GampIterationRecord>& trajectory, const InputParams& truth_x,
    const OutputParams& truth_z);

void write_parameter_report_csv(const std::vector<ParameterErrorRow>& rows,
                                const std::string& path);
void write_pl_report_csv(const std::vector<std::vector<PlComparison>>& per_iteration,
                         const std::string& path);
std::string summarize_pl_report(const std::vector<std::vector<PlComparison>>& per_iteration,
                                double z_threshold = 3.0);

}  // namespace agamp
