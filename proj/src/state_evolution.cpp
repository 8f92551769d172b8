#include "agamp/state_evolution.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "agamp/rng.hpp"

namespace agamp {

namespace {

struct Chol2 {
    double l11 = 0.0, l21 = 0.0, l22 = 0.0;
};

Chol2 cholesky2x2(const Eigen::Matrix2d& k, int iter) {
    const double scale = std::max(k(0, 0) + k(1, 1), 1e-300);
    if (k(0, 0) < -1e-9 * scale || k(1, 1) < -1e-9 * scale) {
        throw SeDivergenceError("covariance with negative diagonal", iter);
    }
    Chol2 c;
    c.l11 = std::sqrt(std::max(k(0, 0), 0.0));
    c.l21 = (c.l11 > 0.0) ? k(0, 1) / c.l11 : 0.0;
    const double rem = k(1, 1) - c.l21 * c.l21;
    if (rem < -1e-9 * scale) throw SeDivergenceError("non-PSD covariance", iter);
    c.l22 = std::sqrt(std::max(rem, 0.0));
    return c;
}

}  // namespace

SeState se_init(const InputParams& lambda_x_true, double beta, double tau_x0) {
    lambda_x_true.validate();
    if (!(beta > 0.0)) throw DomainError("se_init: beta must be > 0");

    SeState state;
    state.k_x.setZero();
    state.k_x(0, 0) = lambda_x_true.prior_variance();  // X_hat^0 = 0
    state.tau_x_bar = tau_x0;
    state.lambda_x_bar = lambda_x_true;
    state.iter = 0;
    return state;
}

SeState se_step(const SeState& state, const SeProblem& problem, const MonteCarloConfig& mc) {
    mc.validate();
    const int N = mc.samples;
    const auto iter = static_cast<std::uint32_t>(state.iter);
    SeState next = state;

    // --- output node update ---
    next.tau_p_bar = std::max(problem.beta * state.tau_x_bar, problem.variance_floor);
    next.k_p = problem.beta * state.k_x;

    const Chol2 chol = cholesky2x2(next.k_p, state.iter);
    VectorXd z_pop(N), p_pop(N), y_pop(N);
    for (int i = 0; i < N; ++i) {
        CounterRng rng(mc.seed, kStreamSeOutput + kSeStreamStride * iter,
                       static_cast<std::uint64_t>(i));
        const double g1 = rng.next_normal();
        const double g2 = rng.next_normal();
        z_pop[i] = chol.l11 * g1;
        p_pop[i] = chol.l21 * g1 + chol.l22 * g2;
        y_pop[i] = problem.output_channel.sample_y(z_pop[i], problem.lambda_z_true, rng);
    }

    if (const auto* oracle = std::get_if<OracleStrategy>(&problem.output_adaptation)) {
        next.lambda_z_bar = oracle->lambda_z;
    } else if (std::holds_alternative<MlOutputStrategy>(problem.output_adaptation)) {
        const auto& strategy = std::get<MlOutputStrategy>(problem.output_adaptation);
        if (!is_poisson_lnp(problem.lambda_z_true)) {
            throw ConfigError("se_step: ML output adaptation requires the poisson-lnp channel");
        }
        const double var_z = problem.ml_var_z > 0.0 ? problem.ml_var_z
                                                    : problem.beta * problem.tau_x0;
        MlResult ml = adapt_output_ml(p_pop, y_pop, var_z, state.lambda_z_bar, strategy,
                                      cached_gauss_hermite(strategy.quad_order));
        next.lambda_z_bar = ml.params;
    } else {
        throw ConfigError("se_step: unsupported output adaptation");
    }

    double gs_deriv_sum = 0.0;
    for (int i = 0; i < N; ++i) {
        const OutputMoments out = problem.output_channel.output(p_pop[i], y_pop[i],
                                                                next.tau_p_bar, next.lambda_z_bar);
        gs_deriv_sum += out.gs_deriv;
    }
    const double tau_s = -gs_deriv_sum / static_cast<double>(N);
    if (!(tau_s > 0.0)) throw SeDivergenceError("non-positive E[-dGs/dp]", state.iter);
    next.tau_r_bar = std::max(1.0 / tau_s, problem.variance_floor);

    // Sum-product specialization; the general expressions are available as a
    // cross-check through se_general_output_params.
    next.xi_r = next.tau_r_bar;
    next.alpha_r = 1.0;

    // --- input node update ---
    if (const auto* oracle = std::get_if<OracleStrategy>(&problem.input_adaptation)) {
        next.lambda_x_bar = oracle->lambda_x;
    } else if (std::holds_alternative<EmInputStrategy>(problem.input_adaptation)) {
        // defer until the population exists
    } else {
        throw ConfigError("se_step: unsupported input adaptation");
    }

    VectorXd x_pop(N), r_pop(N);
    const double noise_sd = std::sqrt(next.xi_r);
    for (int i = 0; i < N; ++i) {
        CounterRng rng(mc.seed, kStreamSeInput + kSeStreamStride * iter,
                       static_cast<std::uint64_t>(i));
        x_pop[i] = problem.input_channel.sample_x(problem.lambda_x_true, rng);
        r_pop[i] = next.alpha_r * x_pop[i] + noise_sd * rng.next_normal();
    }

    if (std::holds_alternative<EmInputStrategy>(problem.input_adaptation)) {
        const auto& strategy = std::get<EmInputStrategy>(problem.input_adaptation);
        EmResult em = adapt_input_em(r_pop, next.tau_r_bar, state.lambda_x_bar, strategy);
        next.lambda_x_bar = em.params;
    }

    double var_sum = 0.0;
    double k11 = 0.0, k12 = 0.0, k22 = 0.0;
    double sq_sum = 0.0, sq_sum2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const InputPosterior post =
            problem.input_channel.posterior(r_pop[i], next.tau_r_bar, next.lambda_x_bar);
        var_sum += post.var;
        const double x = x_pop[i];
        const double xh = post.mean;
        k11 += x * x;
        k12 += x * xh;
        k22 += xh * xh;
        const double sq = (x - xh) * (x - xh);
        sq_sum += sq;
        sq_sum2 += sq * sq;
    }
    const auto dn = static_cast<double>(N);
    next.tau_x_bar = std::max(var_sum / dn, problem.variance_floor);
    next.k_x << k11 / dn, k12 / dn, k12 / dn, k22 / dn;

    const double mse = sq_sum / dn;
    next.mse_stderr = std::sqrt(std::max(sq_sum2 / dn - mse * mse, 0.0) / dn);
    next.iter = state.iter + 1;
    return next;
}

SeRunResult se_run(const SeProblem& problem, const SeRunConfig& run, const MonteCarloConfig& mc) {
    run.validate();
    mc.validate();

    SeState state = se_init(problem.lambda_x_true, problem.beta,
                            problem.tau_x0 > 0.0 ? problem.tau_x0
                                                 : problem.lambda_x_true.prior_variance());
    state.lambda_x_bar = problem.initial_lambda_x;
    state.lambda_z_bar = problem.initial_lambda_z;

    SeProblem prob = problem;
    if (!(prob.tau_x0 > 0.0)) prob.tau_x0 = problem.lambda_x_true.prior_variance();

    SeRunResult result;
    int quiet = 0;
    double prev_mse = -1.0;
    for (int t = 0; t < run.max_iters; ++t) {
        state = se_step(state, prob, mc);
        const double mse = state.predicted_mse();
        result.states.push_back(state);
        result.predicted_mse.push_back(mse);
        result.mse_stderr.push_back(state.mse_stderr);

        if (prev_mse >= 0.0) {
            const double rel = std::fabs(mse - prev_mse) / std::max(prev_mse, 1e-300);
            quiet = (rel < run.fp_tol) ? quiet + 1 : 0;
        }
        prev_mse = mse;
        if (run.early_stop && quiet >= run.fp_consecutive) {
            result.reached_fixed_point = true;
            break;
        }
    }
    return result;
}

SeGeneralCheck se_general_output_params(const SeState& state, const SeProblem& problem,
                                        const MonteCarloConfig& mc, double fd_step) {
    SeGeneralCheck check;

    if (const auto* awgn = std::get_if<AwgnParams>(&state.lambda_z_bar)) {
        // Gs = (y - p)/(tau_p + sigma^2): every expectation is a moment of
        // (Z, P), available in closed form from k_p.
        const double total = state.tau_p_bar + awgn->sigma_sq;
        const double contraction =
            state.k_p(0, 0) - 2.0 * state.k_p(0, 1) + state.k_p(1, 1);
        check.tau_r = total;
        check.xi_r = check.tau_r * check.tau_r * (contraction + awgn->sigma_sq) / (total * total);
        check.alpha_r = check.tau_r / total;
        check.analytic = true;
        return check;
    }

    mc.validate();
    const int N = mc.samples;
    const Chol2 chol = cholesky2x2(state.k_p, state.iter);
    const std::uint32_t stream = 50000 + static_cast<std::uint32_t>(state.iter);

    double deriv_sum = 0.0, gs_sq_sum = 0.0, z_deriv_sum = 0.0;
    for (int i = 0; i < N; ++i) {
        CounterRng rng(mc.seed, stream, static_cast<std::uint64_t>(i));
        const double g1 = rng.next_normal();
        const double g2 = rng.next_normal();
        const double z = chol.l11 * g1;
        const double p = chol.l21 * g1 + chol.l22 * g2;

        // Common-random-number coupling: the same substream generates Y for
        // the base point and both z-perturbations.
        CounterRng rng_y0(mc.seed, stream + 10000, static_cast<std::uint64_t>(i));
        CounterRng rng_yp(mc.seed, stream + 10000, static_cast<std::uint64_t>(i));
        CounterRng rng_ym(mc.seed, stream + 10000, static_cast<std::uint64_t>(i));
        const double y0 = problem.output_channel.sample_y(z, problem.lambda_z_true, rng_y0);
        const double yp =
            problem.output_channel.sample_y(z + fd_step, problem.lambda_z_true, rng_yp);
        const double ym =
            problem.output_channel.sample_y(z - fd_step, problem.lambda_z_true, rng_ym);

        const OutputMoments base =
            problem.output_channel.output(p, y0, state.tau_p_bar, state.lambda_z_bar);
        const OutputMoments plus =
            problem.output_channel.output(p, yp, state.tau_p_bar, state.lambda_z_bar);
        const OutputMoments minus =
            problem.output_channel.output(p, ym, state.tau_p_bar, state.lambda_z_bar);

        deriv_sum += base.gs_deriv;
        gs_sq_sum += base.gs * base.gs;
        z_deriv_sum += (plus.gs - minus.gs) / (2.0 * fd_step);
    }
    const auto dn = static_cast<double>(N);
    const double tau_s = -deriv_sum / dn;
    if (!(tau_s > 0.0)) throw SeDivergenceError("general check: non-positive E[-dGs/dp]", state.iter);
    check.tau_r = 1.0 / tau_s;
    check.xi_r = check.tau_r * check.tau_r * (gs_sq_sum / dn);
    check.alpha_r = check.tau_r * (z_deriv_sum / dn);
    return check;
}

void write_se_trajectory_csv(const SeRunResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_se_trajectory_csv: cannot open " + path);
    out << "iter,tau_p,tau_r,tau_x,rho_bar,sigma_x_sq_bar,"
           "lambda_z_bar_0,lambda_z_bar_1,lambda_z_bar_2,predicted_mse,mse_stderr\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << sep;
    };
    for (const auto& st : result.states) {
        out << st.iter << ',';
        put(st.tau_p_bar, ',');
        put(st.tau_r_bar, ',');
        put(st.tau_x_bar, ',');
        put(st.lambda_x_bar.rho, ',');
        put(st.lambda_x_bar.sigma_x_sq, ',');
        double l0 = 0.0, l1 = 0.0, l2 = 0.0;
        if (const auto* awgn = std::get_if<AwgnParams>(&st.lambda_z_bar)) {
            l0 = awgn->sigma_sq;
        } else {
            const auto& lz = std::get<PoissonLnpParams>(st.lambda_z_bar).lambda_z;
            if (lz.size() > 0) l0 = lz[0];
            if (lz.size() > 1) l1 = lz[1];
            if (lz.size() > 2) l2 = lz[2];
        }
        put(l0, ',');
        put(l1, ',');
        put(l2, ',');
        put(st.predicted_mse(), ',');
        put(st.mse_stderr, '\n');
    }
    if (!out) throw IoError("write_se_trajectory_csv: write failed");
}

}  // namespace agamp
