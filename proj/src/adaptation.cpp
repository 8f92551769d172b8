#include "agamp/adaptation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace agamp {

namespace {

constexpr double kSigmaFloor = 1e-12;
constexpr double kResponsibilityFloor = 1e-12;
constexpr double kMonotonicitySlack = 1e-10;

double em_objective(const VectorXd& r, double tau_r, const InputParams& params) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < r.size(); ++j) {
        acc += input_log_marginal(r[j], tau_r, params);
    }
    return acc / static_cast<double>(r.size());
}

}  // namespace

EmResult adapt_input_em(const VectorXd& r, double tau_r, const InputParams& prev,
                        const EmInputStrategy& strategy) {
    strategy.validate();
    prev.validate();
    if (r.size() < 1) throw DomainError("adapt_input_em: empty r");
    if (!(tau_r > 0.0)) throw DomainError("adapt_input_em: tau_r must be > 0");

    const auto n = static_cast<double>(r.size());
    EmResult result;
    InputParams params = prev;
    params.sigma_x_sq = std::max(params.sigma_x_sq, kSigmaFloor);

    double last_objective = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < strategy.max_em_iters; ++it) {
        double resp_sum = 0.0;
        double weighted_second = 0.0;
        for (Eigen::Index j = 0; j < r.size(); ++j) {
            const InputPosterior post = gauss_bernoulli_posterior(r[j], tau_r, params);
            const double gain = params.sigma_x_sq / (params.sigma_x_sq + tau_r);
            const double slab_mean = r[j] * gain;
            const double slab_var = tau_r * gain;
            resp_sum += post.nonzero_prob;
            weighted_second += post.nonzero_prob * (slab_mean * slab_mean + slab_var);
        }

        if (resp_sum < kResponsibilityFloor) {
            result.params = InputParams{0.0, params.sigma_x_sq};
            result.degenerate = true;
            result.iters = it + 1;
            return result;
        }

        InputParams next;
        next.rho = std::clamp(resp_sum / n, 0.0, 1.0);
        next.sigma_x_sq = std::max(weighted_second / resp_sum, kSigmaFloor);

        const double objective = em_objective(r, tau_r, next);
        if (!result.objectives.empty() &&
            objective < last_objective - kMonotonicitySlack * std::max(1.0, std::fabs(last_objective))) {
            throw AdaptationError("adapt_input_em: EM objective decreased");
        }
        result.objectives.push_back(objective);
        last_objective = objective;

        const double drho = std::fabs(next.rho - params.rho) / std::max(params.rho, 1e-12);
        const double dsig =
            std::fabs(next.sigma_x_sq - params.sigma_x_sq) / std::max(params.sigma_x_sq, 1e-12);
        params = next;
        result.iters = it + 1;
        if (drho < strategy.tol && dsig < strategy.tol) break;
    }

    result.params = params;
    return result;
}

MlResult adapt_output_ml(const VectorXd& p, const VectorXd& y, double var_z,
                         const OutputParams& prev, const MlOutputStrategy& strategy,
                         const QuadratureRule& quad) {
    strategy.validate();
    if (y.size() < 1 || p.size() != y.size()) {
        throw DomainError("adapt_output_ml: p and y must have equal length >= 1");
    }
    if (!(var_z > 0.0)) throw DomainError("adapt_output_ml: var_z must be > 0");
    if (!is_poisson_lnp(prev)) {
        throw DomainError("adapt_output_ml: only the poisson-lnp family has free output parameters");
    }

    MlResult result;
    result.params = prev;
    if (strategy.max_ascent_iters == 0) return result;

    // The simplified ML objective depends on y only through its histogram.
    std::map<double, double> hist;
    for (Eigen::Index i = 0; i < y.size(); ++i) hist[y[i]] += 1.0;
    const auto m = static_cast<double>(y.size());

    const Eigen::Index dim = std::get<PoissonLnpParams>(prev).lambda_z.size();

    if (strategy.box_lo.size() != 1 && strategy.box_lo.size() != static_cast<std::size_t>(dim)) {
        throw ConfigError("adapt_output_ml: box_lo size must be 1 or the coefficient count");
    }
    if (strategy.box_hi.size() != 1 && strategy.box_hi.size() != static_cast<std::size_t>(dim)) {
        throw ConfigError("adapt_output_ml: box_hi size must be 1 or the coefficient count");
    }

    auto project = [&](VectorXd v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            v[k] = std::clamp(v[k], strategy.lo(k), strategy.hi(k));
        }
        return v;
    };

    auto objective = [&](const VectorXd& lambda) {
        double acc = 0.0;
        for (const auto& [value, count] : hist) {
            acc += count * output_log_marginal(value, var_z, lambda, quad);
        }
        return acc / m;
    };
    // Gradient and observed Hessian of the averaged log marginal. The basis
    // (1, u, u^2) is nearly collinear, which leaves the likelihood a narrow
    // curved valley; raw gradient steps crawl along it, so steps are damped
    // Newton directions instead.
    auto objective_grad = [&](const VectorXd& lambda, VectorXd& grad, Eigen::MatrixXd& hess) {
        grad.setZero(dim);
        hess.setZero(dim, dim);
        VectorXd g(dim);
        Eigen::MatrixXd h(dim, dim);
        double acc = 0.0;
        for (const auto& [value, count] : hist) {
            acc += count * output_log_marginal_curvature(value, var_z, lambda, quad, g, h);
            grad += count * g;
            hess += count * h;
        }
        grad /= m;
        hess /= m;
        return acc / m;
    };

    struct Ascent {
        VectorXd lambda;
        double f = -std::numeric_limits<double>::infinity();
        std::vector<double> objectives;
        int iters = 0;
        double grad_inf_norm = 0.0;
    };

    auto ascend = [&](VectorXd lambda) {
        Ascent run;
        lambda = project(std::move(lambda));
        double f = objective(lambda);
        if (!std::isfinite(f)) {
            lambda = project(VectorXd::Zero(dim));
            f = objective(lambda);
            if (!std::isfinite(f)) {
                throw AdaptationError("adapt_output_ml: objective non-finite at fallback start");
            }
        }
        run.objectives.push_back(f);

        VectorXd grad(dim);
        Eigen::MatrixXd hess(dim, dim);
        double damping = 1e-3;
        for (int it = 0; it < strategy.max_ascent_iters; ++it) {
            run.iters = it + 1;
            objective_grad(lambda, grad, hess);
            run.grad_inf_norm = grad.cwiseAbs().maxCoeff();
            if (run.grad_inf_norm < strategy.tol) break;

            // Coordinates pinned against an active bound leave the metric so
            // moves keep making progress along the box boundary.
            const double bound_eps = 1e-10;
            std::vector<Eigen::Index> free;
            for (Eigen::Index k = 0; k < dim; ++k) {
                const bool at_lo = lambda[k] <= strategy.lo(k) + bound_eps && grad[k] < 0.0;
                const bool at_hi = lambda[k] >= strategy.hi(k) - bound_eps && grad[k] > 0.0;
                if (!at_lo && !at_hi) free.push_back(k);
            }
            if (free.empty()) break;  // every coordinate pinned

            const auto fn = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd neg_h(fn, fn);
            VectorXd gsub(fn);
            for (Eigen::Index a = 0; a < fn; ++a) {
                gsub[a] = grad[free[static_cast<std::size_t>(a)]];
                for (Eigen::Index b = 0; b < fn; ++b) {
                    neg_h(a, b) = -hess(free[static_cast<std::size_t>(a)],
                                        free[static_cast<std::size_t>(b)]);
                }
            }
            const double scale = std::max(neg_h.diagonal().cwiseAbs().maxCoeff(), 1e-12);

            // Levenberg loop: inflate the damping until the (projected)
            // Newton ascent step improves the objective.
            bool accepted = false;
            while (damping < 1e10) {
                Eigen::MatrixXd m_damped = neg_h;
                m_damped.diagonal().array() += damping * scale;
                const Eigen::LLT<Eigen::MatrixXd> llt(m_damped);
                if (llt.info() != Eigen::Success) {
                    damping *= 10.0;
                    continue;
                }
                const VectorXd dsub = llt.solve(gsub);
                if (!dsub.allFinite() || dsub.dot(gsub) <= 0.0) {
                    damping *= 10.0;
                    continue;
                }
                VectorXd direction = VectorXd::Zero(dim);
                for (Eigen::Index a = 0; a < fn; ++a) {
                    direction[free[static_cast<std::size_t>(a)]] = dsub[a];
                }
                const VectorXd candidate = project(lambda + direction);
                const double f_new = objective(candidate);
                if (std::isfinite(f_new) && f_new > f) {
                    lambda = candidate;
                    f = f_new;
                    run.objectives.push_back(f);
                    damping = std::max(damping / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
                damping *= 10.0;
            }
            if (!accepted) break;
        }
        run.lambda = lambda;
        run.f = f;
        return run;
    };

    // With a symmetric Z the likelihood of lambda equals that of its u -> 1-u
    // reflection, so a single local ascent can land in the mirrored basin (or
    // against the box that excludes it). Re-ascending from the reflection of
    // the first endpoint covers the other basin deterministically.
    auto reflect = [&](const VectorXd& lambda) {
        VectorXd out = VectorXd::Zero(dim);
        std::vector<double> binom(static_cast<std::size_t>(dim), 0.0);
        for (Eigen::Index i = 0; i < dim; ++i) {
            // coefficients of (1-u)^i
            binom.assign(static_cast<std::size_t>(dim), 0.0);
            double c = 1.0;
            for (Eigen::Index j = 0; j <= i; ++j) {
                binom[static_cast<std::size_t>(j)] = c;
                c *= -static_cast<double>(i - j) / static_cast<double>(j + 1);
            }
            for (Eigen::Index j = 0; j <= i; ++j) {
                out[j] += lambda[i] * binom[static_cast<std::size_t>(j)];
            }
        }
        return out;
    };

    Ascent best = ascend(std::get<PoissonLnpParams>(prev).lambda_z);
    Ascent mirrored = ascend(reflect(best.lambda));
    if (mirrored.f > best.f) best = std::move(mirrored);

    result.params = PoissonLnpParams{best.lambda};
    result.iters = best.iters;
    result.grad_inf_norm = best.grad_inf_norm;
    result.objectives = std::move(best.objectives);
    return result;
}

}  // namespace agamp
