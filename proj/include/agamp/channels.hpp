#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>

#include "agamp/quadrature.hpp"
#include "agamp/rng.hpp"
#include "agamp/types.hpp"

namespace agamp {

// Relative floor applied to posterior variances so downstream 1/tau divisions
// stay finite: var >= kVarianceFloorRel * (reference variance).
constexpr double kVarianceFloorRel = 1e-12;

struct InputPosterior {
    double mean = 0.0;
    double var = 0.0;
    double nonzero_prob = 0.0;
};

struct OutputMoments {
    double gz = 0.0;        // E[Z | P=p, Y=y]
    double gs = 0.0;        // (gz - p) / tau_p
    double gs_deriv = 0.0;  // d gs / d p, equals -(1 - var/tau_p)/tau_p
};

// ---------------------------------------------------------------------------
// Scalar operations (closed forms and quadrature kernels)
// ---------------------------------------------------------------------------

// Exact spike-slab posterior under R = X + N(0, tau_r), computed in the log
// domain. nonzero_prob is the posterior slab responsibility pi(r).
InputPosterior gauss_bernoulli_posterior(double r, double tau_r, const InputParams& params);

// log of the two-component mixture density rho N(r; 0, sigma_x^2 + tau_r)
// + (1 - rho) N(r; 0, tau_r).
double input_log_marginal(double r, double tau_r, const InputParams& params);

// AWGN output update; pure closed form.
OutputMoments awgn_output(double p, double y, double tau_p, double sigma_sq);

// log-rate lambda_z . psi(z) of the sigmoid-polynomial Poisson nonlinearity.
double lnp_log_rate(double z, const VectorXd& lambda_z);
double lnp_rate(double z, const VectorXd& lambda_z);

// Poisson-LNP output update via Gauss-Hermite in the log domain.
OutputMoments poisson_lnp_output(double p, double y, double tau_p, const VectorXd& lambda_z,
                                 const QuadratureRule& quad);

// Generic quadrature path: posterior moments of Z under prior N(p, tau_p) and
// an arbitrary log-likelihood z -> log p(y|z). The Poisson channel is a
// specialization; tests run it with the Gaussian likelihood to validate the
// engine against the AWGN closed forms.
OutputMoments quadrature_output_moments(double p, double tau_p,
                                        const std::function<double(double)>& log_lik,
                                        const QuadratureRule& quad);

// log p(y | P=p) = log integral N(z; p, tau_p) p(y|z) dz for the Poisson-LNP
// channel (includes the 1/y! term).
double poisson_lnp_log_py_given_p(double p, double y, double tau_p, const VectorXd& lambda_z,
                                  const QuadratureRule& quad);

// Marginal log p_Y(y) when Z ~ N(0, var_z), plus its analytic gradient in
// lambda_z: E_posterior[(y - f(Z)) psi(Z)].
double output_log_marginal(double y, double var_z, const VectorXd& lambda_z,
                           const QuadratureRule& quad);
double output_log_marginal_grad(double y, double var_z, const VectorXd& lambda_z,
                                const QuadratureRule& quad, VectorXd& grad_out);

// Same with the exact observed Hessian in lambda_z:
// E_post[((y-f)^2 - f) psi psi^T] - grad grad^T.
double output_log_marginal_curvature(double y, double var_z, const VectorXd& lambda_z,
                                     const QuadratureRule& quad, VectorXd& grad_out,
                                     Eigen::MatrixXd& hess_out);

// ---------------------------------------------------------------------------
// Channel interfaces consumed by the engine, adaptation and state evolution
// ---------------------------------------------------------------------------

class InputChannel {
  public:
    virtual ~InputChannel() = default;
    virtual InputPosterior posterior(double r, double tau_r, const InputParams& params) const = 0;
    virtual double log_marginal(double r, double tau_r, const InputParams& params) const = 0;
    virtual double sample_x(const InputParams& params, CounterRng& rng) const = 0;
};

class OutputChannel {
  public:
    virtual ~OutputChannel() = default;
    virtual OutputMoments output(double p, double y, double tau_p,
                                 const OutputParams& params) const = 0;
    virtual double log_py_given_p(double p, double y, double tau_p,
                                  const OutputParams& params) const = 0;
    // Draw Y from the channel at the given Z; used by state evolution and the
    // instance generator.
    virtual double sample_y(double z, const OutputParams& params, CounterRng& rng) const = 0;
};

class GaussBernoulliInput final : public InputChannel {
  public:
    InputPosterior posterior(double r, double tau_r, const InputParams& params) const override {
        return gauss_bernoulli_posterior(r, tau_r, params);
    }
    double log_marginal(double r, double tau_r, const InputParams& params) const override {
        return input_log_marginal(r, tau_r, params);
    }
    double sample_x(const InputParams& params, CounterRng& rng) const override;
};

class AwgnOutput final : public OutputChannel {
  public:
    OutputMoments output(double p, double y, double tau_p,
                         const OutputParams& params) const override;
    double log_py_given_p(double p, double y, double tau_p,
                          const OutputParams& params) const override;
    double sample_y(double z, const OutputParams& params, CounterRng& rng) const override;
};

class PoissonLnpOutput final : public OutputChannel {
  public:
    explicit PoissonLnpOutput(QuadratureRule quad) : quad_(std::move(quad)) {}
    PoissonLnpOutput() : quad_(QuadratureRule::gauss_hermite(kDefaultOrder)) {}

    OutputMoments output(double p, double y, double tau_p,
                         const OutputParams& params) const override;
    double log_py_given_p(double p, double y, double tau_p,
                          const OutputParams& params) const override;
    double sample_y(double z, const OutputParams& params, CounterRng& rng) const override;

    const QuadratureRule& quad() const { return quad_; }

    static constexpr int kDefaultOrder = 41;

  private:
    QuadratureRule quad_;
};

// Picks the implementation matching the parameter variant.
std::unique_ptr<OutputChannel> make_output_channel(const OutputParams& params,
                                                   int quad_order = PoissonLnpOutput::kDefaultOrder);

}  // namespace agamp
