#include "agamp/gamp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace agamp {

namespace {

void check_finite(const VectorXd& v, const char* step, int iter) {
    if (!v.allFinite()) throw DivergenceError(step, iter);
}

void check_finite(double x, const char* step, int iter) {
    if (!std::isfinite(x)) throw DivergenceError(step, iter);
}

void log_step(GampIterationRecord* record, const char* name) {
    if (record != nullptr) record->steps.emplace_back(name);
}

double lambda_z_component(const OutputParams& params, int k) {
    if (const auto* awgn = std::get_if<AwgnParams>(&params)) {
        return k == 0 ? awgn->sigma_sq : std::numeric_limits<double>::quiet_NaN();
    }
    const auto& lnp = std::get<PoissonLnpParams>(params);
    return k < lnp.lambda_z.size() ? lnp.lambda_z[k] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

GampState gamp_init(Eigen::Index m, Eigen::Index n, const InputParams& initial_x,
                    const OutputParams& initial_z, const GampConfig& config) {
    if (m < 1 || n < 1) throw DomainError("gamp_init: dimensions must be >= 1");
    config.validate();
    initial_x.validate();
    validate(initial_z);

    GampState state;
    state.x_hat = VectorXd::Zero(n);  // prior mean of the zero-mean family
    state.tau_x = std::max(initial_x.prior_variance(), config.variance_floor);
    state.s = VectorXd::Zero(m);
    state.p = VectorXd::Zero(m);
    state.r = VectorXd::Zero(n);
    state.z_hat = VectorXd::Zero(m);
    state.lambda_x_hat = initial_x;
    state.lambda_z_hat = initial_z;
    state.iter = 0;
    return state;
}

GampState gamp_iterate(const GampState& state, const GampProblem& problem,
                       const GampConfig& config, GampIterationRecord* record) {
    const Eigen::Index m = problem.a_matrix.rows();
    const Eigen::Index n = problem.a_matrix.cols();
    if (state.x_hat.size() != n || problem.y.size() != m) {
        throw DomainError("gamp_iterate: dimension mismatch");
    }

    GampState next = state;
    const int iter = state.iter;

    // (1) output node variance
    next.tau_p = std::max(problem.frob_sq * state.tau_x / static_cast<double>(m),
                          config.variance_floor);
    check_finite(next.tau_p, "tau_p", iter);
    log_step(record, "tau_p");

    // (2) Onsager-corrected output estimate
    next.p = problem.a_matrix * state.x_hat - state.s * next.tau_p;
    check_finite(next.p, "p", iter);
    log_step(record, "p");

    // (3) output adaptation
    if (const auto* oracle = std::get_if<OracleStrategy>(&config.output_adaptation)) {
        next.lambda_z_hat = oracle->lambda_z;
    } else {
        const auto& strategy = std::get<MlOutputStrategy>(config.output_adaptation);
        if (!(problem.ml_var_z > 0.0)) {
            throw ConfigError("gamp_iterate: ml_var_z must be set for ML output adaptation");
        }
        MlResult ml = adapt_output_ml(next.p, problem.y, problem.ml_var_z, state.lambda_z_hat,
                                      strategy, cached_gauss_hermite(strategy.quad_order));
        next.lambda_z_hat = ml.params;
    }
    log_step(record, "adapt_z");

    // (4)-(6) componentwise output updates and their averaged derivative
    double gs_deriv_sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const OutputMoments out =
            problem.output_channel.output(next.p[i], problem.y[i], next.tau_p, next.lambda_z_hat);
        next.z_hat[i] = out.gz;
        next.s[i] = out.gs;
        gs_deriv_sum += out.gs_deriv;
    }
    check_finite(next.z_hat, "z_hat", iter);
    log_step(record, "z_hat");
    check_finite(next.s, "s", iter);
    log_step(record, "s");

    next.tau_s = -gs_deriv_sum / static_cast<double>(m);
    check_finite(next.tau_s, "tau_s", iter);
    if (next.tau_s <= 0.0) throw DivergenceError("tau_s", iter);
    next.tau_s = std::max(next.tau_s, config.variance_floor);
    log_step(record, "tau_s");

    // (7) input node variance
    next.tau_r = std::max(static_cast<double>(n) / (problem.frob_sq * next.tau_s),
                          config.variance_floor);
    check_finite(next.tau_r, "tau_r", iter);
    log_step(record, "tau_r");

    // (8) pseudo-observation of x
    next.r = state.x_hat + next.tau_r * (problem.a_matrix.transpose() * next.s);
    check_finite(next.r, "r", iter);
    log_step(record, "r");

    // (9) input adaptation
    if (const auto* oracle = std::get_if<OracleStrategy>(&config.input_adaptation)) {
        next.lambda_x_hat = oracle->lambda_x;
    } else {
        const auto& strategy = std::get<EmInputStrategy>(config.input_adaptation);
        EmResult em = adapt_input_em(next.r, next.tau_r, state.lambda_x_hat, strategy);
        next.lambda_x_hat = em.params;
    }
    log_step(record, "adapt_x");

    // (10)-(11) componentwise input update and posterior-variance average
    double var_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const InputPosterior post =
            problem.input_channel.posterior(next.r[j], next.tau_r, next.lambda_x_hat);
        next.x_hat[j] = post.mean;
        var_sum += post.var;
    }
    check_finite(next.x_hat, "x_hat", iter);
    log_step(record, "x_hat");

    next.tau_x = std::max(var_sum / static_cast<double>(n), config.variance_floor);
    check_finite(next.tau_x, "tau_x", iter);
    log_step(record, "tau_x");

    next.iter = iter + 1;

    if (record != nullptr) {
        record->iter = next.iter;
        record->tau_p = next.tau_p;
        record->tau_s = next.tau_s;
        record->tau_r = next.tau_r;
        record->tau_x = next.tau_x;
        record->lambda_x_hat = next.lambda_x_hat;
        record->lambda_z_hat = next.lambda_z_hat;
        if (problem.x_true != nullptr) {
            record->mse = (next.x_hat - *problem.x_true).squaredNorm() /
                          static_cast<double>(n);
        }
    }
    return next;
}

GampResult gamp_run_problem(const GampProblem& problem, const GampConfig& config,
                            const InputParams& initial_x, const OutputParams& initial_z) {
    config.validate();
    const Eigen::Index m = problem.a_matrix.rows();
    const Eigen::Index n = problem.a_matrix.cols();

    GampResult result;
    GampState state = gamp_init(m, n, initial_x, initial_z, config);

    GampProblem run_problem = problem;
    if (!(run_problem.ml_var_z > 0.0)) {
        // Var(Z) = (||A||_F^2 / m) * tau_x^0; constant across iterations.
        run_problem.ml_var_z = problem.frob_sq / static_cast<double>(m) * state.tau_x;
    }

    // Undamped GAMP can blow up on unlucky small-n instances while every
    // vector stays finite; runaway growth counts as divergence.
    const double y_scale = problem.y.squaredNorm() / static_cast<double>(m);
    const double growth_bound = 1e9 * std::max({1.0, state.tau_x, y_scale});

    const bool recording = config.record_trajectory;
    for (int it = 0; it < config.max_iters; ++it) {
        GampIterationRecord record;
        const VectorXd x_prev = state.x_hat;
        state = gamp_iterate(state, run_problem, config, recording ? &record : nullptr);

        const double x_scale = state.x_hat.squaredNorm() / static_cast<double>(n);
        if (state.tau_x > growth_bound || state.tau_p > growth_bound ||
            x_scale > growth_bound) {
            throw DivergenceError("growth", it);
        }

        const double denom = std::max(x_prev.norm(), 1e-300);
        const double rel_change = (state.x_hat - x_prev).norm() / denom;

        if (recording) {
            record.rel_change = rel_change;
            if (config.record_populations) {
                record.r_copy = state.r;
                record.x_hat_copy = state.x_hat;
            }
            result.trajectory.push_back(std::move(record));
        }

        result.iterations = it + 1;
        if (rel_change < config.stop_tol) {
            result.converged = true;
            break;
        }
    }

    if (problem.x_true != nullptr) {
        result.mse = (state.x_hat - *problem.x_true).squaredNorm() / static_cast<double>(n);
    }
    result.state = std::move(state);
    return result;
}

GampResult gamp_run(const ProblemInstance& instance, const GampConfig& config,
                    const InputParams& initial_x, const OutputParams& initial_z) {
    GaussBernoulliInput input_channel;
    auto output_channel = make_output_channel(instance.lambda_z_true);
    GampProblem problem(instance.a_matrix, instance.y_obs, input_channel, *output_channel,
                        &instance.x_true);
    return gamp_run_problem(problem, config, initial_x, initial_z);
}

void write_trajectory_csv(const std::vector<GampIterationRecord>& trajectory,
                          const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_trajectory_csv: cannot open " + path);
    out << "iter,tau_p,tau_s,tau_r,tau_x,rho_hat,sigma_x_sq_hat,"
           "lambda_z_hat_0,lambda_z_hat_1,lambda_z_hat_2,mse,rel_change\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        if (std::isnan(v)) {
            out << sep;
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << sep;
        }
    };
    for (const auto& rec : trajectory) {
        out << rec.iter << ',';
        put(rec.tau_p, ',');
        put(rec.tau_s, ',');
        put(rec.tau_r, ',');
        put(rec.tau_x, ',');
        put(rec.lambda_x_hat.rho, ',');
        put(rec.lambda_x_hat.sigma_x_sq, ',');
        put(lambda_z_component(rec.lambda_z_hat, 0), ',');
        put(lambda_z_component(rec.lambda_z_hat, 1), ',');
        put(lambda_z_component(rec.lambda_z_hat, 2), ',');
        put(rec.mse, ',');
        put(rec.rel_change, '\n');
    }
    if (!out) throw IoError("write_trajectory_csv: write failed");
}

}  // namespace agamp
