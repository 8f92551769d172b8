#include "agamp/channels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace agamp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

inline double log_normal_pdf(double x, double var) {
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * x * x / var;
}

inline double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double log1p_exp(double t) {
    // log(1 + e^t), stable both tails.
    if (t > 0.0) return t + std::log1p(std::exp(-t));
    return std::log1p(std::exp(t));
}

}  // namespace

double inf_norm_diff(const VectorXd& a, const VectorXd& b) {
    if (a.size() != b.size()) throw DomainError("inf_norm_diff: length mismatch");
    if (a.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff();
}

std::string describe(const OutputParams& params) {
    if (const auto* awgn = std::get_if<AwgnParams>(&params)) {
        return "awgn(sigma_sq=" + std::to_string(awgn->sigma_sq) + ")";
    }
    const auto& lnp = std::get<PoissonLnpParams>(params);
    std::string s = "poisson_lnp(lambda_z=[";
    for (Eigen::Index i = 0; i < lnp.lambda_z.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(lnp.lambda_z[i]);
    }
    return s + "])";
}

InputPosterior gauss_bernoulli_posterior(double r, double tau_r, const InputParams& params) {
    params.validate();
    if (!(tau_r > 0.0)) throw DomainError("gauss_bernoulli_posterior: tau_r must be > 0");

    InputPosterior post;
    if (params.rho == 0.0) return post;  // point mass at zero

    const double sx = params.sigma_x_sq;
    const double wiener_gain = sx / (sx + tau_r);
    const double slab_mean = r * wiener_gain;       // E[X | r, nonzero]
    const double slab_var = tau_r * wiener_gain;    // var[X | r, nonzero]

    double pi;
    if (params.rho >= 1.0) {
        pi = 1.0;
    } else {
        // log-odds of the slab vs the spike under R = X + N(0, tau_r)
        const double log_odds = std::log(params.rho) - std::log1p(-params.rho) +
                                0.5 * std::log(tau_r / (sx + tau_r)) +
                                0.5 * r * r * sx / (tau_r * (sx + tau_r));
        pi = sigmoid(log_odds);
    }

    post.nonzero_prob = pi;
    post.mean = pi * slab_mean;
    const double second_moment = pi * (slab_mean * slab_mean + slab_var);
    const double var = second_moment - post.mean * post.mean;
    post.var = std::max(var, kVarianceFloorRel * params.prior_variance());
    return post;
}

double input_log_marginal(double r, double tau_r, const InputParams& params) {
    params.validate();
    if (!(tau_r > 0.0)) throw DomainError("input_log_marginal: tau_r must be > 0");

    if (params.rho == 0.0) return log_normal_pdf(r, tau_r);
    if (params.rho >= 1.0) return log_normal_pdf(r, params.sigma_x_sq + tau_r);

    const double la = std::log(params.rho) + log_normal_pdf(r, params.sigma_x_sq + tau_r);
    const double lb = std::log1p(-params.rho) + log_normal_pdf(r, tau_r);
    const double hi = std::max(la, lb);
    return hi + log1p_exp(std::min(la, lb) - hi);
}

OutputMoments awgn_output(double p, double y, double tau_p, double sigma_sq) {
    if (!(tau_p > 0.0)) throw DomainError("awgn_output: tau_p must be > 0");
    if (!(sigma_sq >= 0.0)) throw DomainError("awgn_output: sigma_sq must be >= 0");
    const double total = tau_p + sigma_sq;
    if (!(total > 0.0)) throw DomainError("awgn_output: degenerate channel, tau_p + sigma_sq = 0");

    OutputMoments out;
    out.gs = (y - p) / total;
    out.gz = p + tau_p * out.gs;
    out.gs_deriv = -1.0 / total;
    return out;
}

double lnp_log_rate(double z, const VectorXd& lambda_z) {
    const double u = sigmoid(z);
    double acc = 0.0;
    double power = 1.0;
    for (Eigen::Index k = 0; k < lambda_z.size(); ++k) {
        acc += lambda_z[k] * power;
        power *= u;
    }
    return acc;
}

double lnp_rate(double z, const VectorXd& lambda_z) { return std::exp(lnp_log_rate(z, lambda_z)); }

namespace {

struct LaplaceFit {
    double center = 0.0;
    double var = 0.0;
};

// Mode and inverse curvature of g(z) = log N(z; p, tau_p) + log_lik(z). The
// Poisson likelihood gets sharp at large counts, so the Gauss-Hermite nodes
// are re-centered on the posterior mode instead of the prior (Liu-Pierce
// adaptive quadrature). A flat likelihood reproduces the prior-centered rule
// exactly.
LaplaceFit laplace_fit(double p, double tau_p, const std::function<double(double)>& log_lik,
                       const QuadratureRule& quad) {
    auto g = [&](double z) { return -0.5 * (z - p) * (z - p) / tau_p + log_lik(z); };

    // coarse scan over the prior-centered nodes
    const double scale = std::sqrt(2.0 * tau_p);
    double best_z = p;
    double best_g = g(p);
    for (int k = 0; k < quad.order; k += 2) {
        const double z = p + scale * quad.nodes[k];
        const double gz = g(z);
        if (gz > best_g) {
            best_g = gz;
            best_z = z;
        }
    }

    // Newton refinement with finite-difference derivatives
    const double sd = std::sqrt(tau_p);
    const double h = 1e-4 * sd;
    double z = best_z;
    double d2 = -1.0 / tau_p;
    for (int it = 0; it < 40; ++it) {
        const double g0 = g(z);
        const double gp = g(z + h);
        const double gm = g(z - h);
        const double d1 = (gp - gm) / (2.0 * h);
        d2 = (gp - 2.0 * g0 + gm) / (h * h);
        if (!(d2 < 0.0)) d2 = -1.0 / tau_p;
        double step = -d1 / d2;
        step = std::clamp(step, -5.0 * sd, 5.0 * sd);
        z += step;
        if (std::fabs(step) < 1e-10 * sd) break;
    }

    LaplaceFit fit;
    fit.center = std::isfinite(z) ? z : p;
    fit.var = std::clamp(-1.0 / d2, 1e-12 * tau_p, 1e2 * tau_p);
    return fit;
}

struct CenteredEvaluation {
    Eigen::VectorXd z;    // node locations
    Eigen::VectorXd lw;   // log weight + envelope + g(z)
    double max_lw = -std::numeric_limits<double>::infinity();
    double log_scale = 0.0;  // log sqrt(2 var_hat)
};

// Evaluates log N(z; p, tau_p) + log_lik(z) on mode-centered nodes; the x^2
// envelope term converts the Gauss-Hermite weight back to a plain integral:
// integral exp(g) dz ~= sqrt(2 v) sum_k w_k exp(x_k^2) exp(g(z_k)).
CenteredEvaluation evaluate_centered(double p, double tau_p,
                                     const std::function<double(double)>& log_lik,
                                     const QuadratureRule& quad) {
    const LaplaceFit fit = laplace_fit(p, tau_p, log_lik, quad);
    const double scale = std::sqrt(2.0 * fit.var);

    CenteredEvaluation ev;
    ev.z.resize(quad.order);
    ev.lw.resize(quad.order);
    ev.log_scale = std::log(scale);
    for (int k = 0; k < quad.order; ++k) {
        const double x = quad.nodes[k];
        const double z = fit.center + scale * x;
        ev.z[k] = z;
        ev.lw[k] = quad.log_weights[k] + x * x - 0.5 * (z - p) * (z - p) / tau_p -
                   0.5 * (kLog2Pi + std::log(tau_p)) + log_lik(z);
        ev.max_lw = std::max(ev.max_lw, ev.lw[k]);
    }
    return ev;
}

}  // namespace

OutputMoments quadrature_output_moments(double p, double tau_p,
                                        const std::function<double(double)>& log_lik,
                                        const QuadratureRule& quad) {
    if (!(tau_p > 0.0)) throw DomainError("quadrature_output_moments: tau_p must be > 0");

    const CenteredEvaluation ev = evaluate_centered(p, tau_p, log_lik, quad);
    if (!std::isfinite(ev.max_lw)) {
        throw ChannelOverflowError("quadrature_output_moments: non-finite accumulation");
    }

    double norm = 0.0, mean_acc = 0.0;
    for (int k = 0; k < quad.order; ++k) {
        const double w = std::exp(ev.lw[k] - ev.max_lw);
        norm += w;
        mean_acc += w * ev.z[k];
    }
    const double gz = mean_acc / norm;
    double var_acc = 0.0;
    for (int k = 0; k < quad.order; ++k) {
        const double w = std::exp(ev.lw[k] - ev.max_lw);
        const double d = ev.z[k] - gz;
        var_acc += w * d * d;
    }

    OutputMoments out;
    out.gz = gz;
    double var = var_acc / norm;
    if (!std::isfinite(out.gz) || !std::isfinite(var)) {
        throw ChannelOverflowError("quadrature_output_moments: non-finite moments");
    }
    // Conditioning cannot grow the variance beyond the prior's; keep the
    // derivative identity strictly inside (0, 1/tau_p].
    var = std::clamp(var, kVarianceFloorRel * tau_p, tau_p * (1.0 - 1e-12));
    out.gs = (out.gz - p) / tau_p;
    out.gs_deriv = -(1.0 - var / tau_p) / tau_p;
    return out;
}

OutputMoments poisson_lnp_output(double p, double y, double tau_p, const VectorXd& lambda_z,
                                 const QuadratureRule& quad) {
    if (y < 0.0) throw DomainError("poisson_lnp_output: y must be >= 0");
    return quadrature_output_moments(
        p, tau_p,
        [&](double z) {
            const double log_f = lnp_log_rate(z, lambda_z);
            return y * log_f - std::exp(log_f);
        },
        quad);
}

namespace {

// Shared log-marginal kernel: log integral N(z; p, tau) Poisson(y; f(z)) dz
// with optional gradient / observed-Hessian accumulation in lambda_z.
double lnp_marginal_kernel(double p, double y, double tau, const VectorXd& lambda_z,
                           const QuadratureRule& quad, VectorXd* grad_out,
                           Eigen::MatrixXd* hess_out) {
    if (!(tau > 0.0)) throw DomainError("output_log_marginal: variance must be > 0");
    if (y < 0.0) throw DomainError("output_log_marginal: y must be >= 0");

    auto log_lik = [&](double z) {
        const double log_f = lnp_log_rate(z, lambda_z);
        return y * log_f - std::exp(log_f);
    };
    const CenteredEvaluation ev = evaluate_centered(p, tau, log_lik, quad);
    if (!std::isfinite(ev.max_lw)) {
        throw ChannelOverflowError("output_log_marginal: non-finite accumulation");
    }
    double norm = 0.0;
    for (int k = 0; k < quad.order; ++k) norm += std::exp(ev.lw[k] - ev.max_lw);

    if (grad_out != nullptr || hess_out != nullptr) {
        const Eigen::Index r = lambda_z.size();
        VectorXd grad = VectorXd::Zero(r);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(r, r);
        VectorXd psi(r);
        for (int k = 0; k < quad.order; ++k) {
            const double z = ev.z[k];
            const double w = std::exp(ev.lw[k] - ev.max_lw) / norm;
            const double u = sigmoid(z);
            double power = 1.0;
            for (Eigen::Index j = 0; j < r; ++j) {
                psi[j] = power;
                power *= u;
            }
            const double f = lnp_rate(z, lambda_z);
            const double resid = y - f;
            grad += (w * resid) * psi;
            if (hess_out != nullptr) {
                // E_post[ d2 log lik + (d log lik)^2 ] contribution
                second += (w * (resid * resid - f)) * (psi * psi.transpose());
            }
        }
        if (grad_out != nullptr) *grad_out = grad;
        if (hess_out != nullptr) *hess_out = second - grad * grad.transpose();
    }

    return ev.log_scale + ev.max_lw + std::log(norm) - std::lgamma(y + 1.0);
}

}  // namespace

double poisson_lnp_log_py_given_p(double p, double y, double tau_p, const VectorXd& lambda_z,
                                  const QuadratureRule& quad) {
    return lnp_marginal_kernel(p, y, tau_p, lambda_z, quad, nullptr, nullptr);
}

double output_log_marginal(double y, double var_z, const VectorXd& lambda_z,
                           const QuadratureRule& quad) {
    return lnp_marginal_kernel(0.0, y, var_z, lambda_z, quad, nullptr, nullptr);
}

double output_log_marginal_grad(double y, double var_z, const VectorXd& lambda_z,
                                const QuadratureRule& quad, VectorXd& grad_out) {
    return lnp_marginal_kernel(0.0, y, var_z, lambda_z, quad, &grad_out, nullptr);
}

double output_log_marginal_curvature(double y, double var_z, const VectorXd& lambda_z,
                                     const QuadratureRule& quad, VectorXd& grad_out,
                                     Eigen::MatrixXd& hess_out) {
    return lnp_marginal_kernel(0.0, y, var_z, lambda_z, quad, &grad_out, &hess_out);
}

double GaussBernoulliInput::sample_x(const InputParams& params, CounterRng& rng) const {
    const double u = rng.next_double();
    if (u >= params.rho) return 0.0;
    return std::sqrt(params.sigma_x_sq) * rng.next_normal();
}

OutputMoments AwgnOutput::output(double p, double y, double tau_p,
                                 const OutputParams& params) const {
    return awgn_output(p, y, tau_p, std::get<AwgnParams>(params).sigma_sq);
}

double AwgnOutput::log_py_given_p(double p, double y, double tau_p,
                                  const OutputParams& params) const {
    const double sigma_sq = std::get<AwgnParams>(params).sigma_sq;
    return log_normal_pdf(y - p, tau_p + sigma_sq);
}

double AwgnOutput::sample_y(double z, const OutputParams& params, CounterRng& rng) const {
    const double sigma_sq = std::get<AwgnParams>(params).sigma_sq;
    return z + std::sqrt(sigma_sq) * rng.next_normal();
}

OutputMoments PoissonLnpOutput::output(double p, double y, double tau_p,
                                       const OutputParams& params) const {
    return poisson_lnp_output(p, y, tau_p, std::get<PoissonLnpParams>(params).lambda_z, quad_);
}

double PoissonLnpOutput::log_py_given_p(double p, double y, double tau_p,
                                        const OutputParams& params) const {
    return poisson_lnp_log_py_given_p(p, y, tau_p, std::get<PoissonLnpParams>(params).lambda_z,
                                      quad_);
}

double PoissonLnpOutput::sample_y(double z, const OutputParams& params, CounterRng& rng) const {
    const double rate = lnp_rate(z, std::get<PoissonLnpParams>(params).lambda_z);
    if (!std::isfinite(rate)) {
        throw ChannelOverflowError("poisson-lnp rate overflow while sampling");
    }
    return static_cast<double>(rng.next_poisson(rate));
}

std::unique_ptr<OutputChannel> make_output_channel(const OutputParams& params, int quad_order) {
    if (is_awgn(params)) return std::make_unique<AwgnOutput>();
    return std::make_unique<PoissonLnpOutput>(QuadratureRule::gauss_hermite(quad_order));
}

}  // namespace agamp
