#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "agamp/channels.hpp"
#include "agamp/model.hpp"

using namespace agamp;

namespace {

double sample_variance(const VectorXd& v) {
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("matrix entries have variance 1/m") {
    SUBCASE("tiny matrix sanity window") {
        for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
            const RowMatrixXd a = generate_matrix(4, 4, seed);
            const double var = a.array().square().sum() / 16.0;
            CHECK(var > 0.02 * 0.25);
            CHECK(var < 3.5 * 0.25);
            const RowMatrixXd b = generate_matrix(4, 4, seed);
            CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
        }
    }
    SUBCASE("large matrix moment estimate") {
        const RowMatrixXd a = generate_matrix(2000, 1000, 1);
        const double var = a.array().square().sum() / static_cast<double>(a.size());
        CHECK(var == doctest::Approx(1.0 / 2000.0).epsilon(0.05));
    }
    SUBCASE("1x1 has unit variance parameter") {
        // not a statistical check; just the scale path for m = 1
        const RowMatrixXd a = generate_matrix(1, 1, 7);
        CHECK(std::isfinite(a(0, 0)));
        CHECK(std::fabs(a(0, 0)) < 10.0);
    }
    SUBCASE("zero dimension throws") {
        CHECK_THROWS_AS(generate_matrix(0, 4, 1), DomainError);
        CHECK_THROWS_AS(generate_matrix(4, 0, 1), DomainError);
    }
    SUBCASE("worker count does not change the draw") {
        const RowMatrixXd a = generate_matrix(64, 32, 5, 1);
        const RowMatrixXd b = generate_matrix(64, 32, 5, 2);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("gauss-bernoulli draws") {
    SUBCASE("rho = 0 gives the zero vector") {
        const VectorXd x = generate_gauss_bernoulli(1000, {0.0, 1.0}, 3);
        CHECK(x.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("rho = 1 gives a standard normal vector") {
        const VectorXd x = generate_gauss_bernoulli(100000, {1.0, 1.0}, 3);
        CHECK(sample_variance(x) == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("sparse draw matches rho and slab variance") {
        const InputParams params{0.2, 5.0};
        const VectorXd x = generate_gauss_bernoulli(100000, params, 11);
        int nonzero = 0;
        double ss = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            if (x[j] != 0.0) {
                ++nonzero;
                ss += x[j] * x[j];
            }
        }
        const double frac = nonzero / 1e5;
        CHECK(std::fabs(frac - 0.2) < 0.01);
        CHECK(ss / nonzero == doctest::Approx(5.0).epsilon(0.05));
        // second moment within 3 standard errors of rho sigma_x^2
        const double second = x.squaredNorm() / 1e5;
        const double se = std::sqrt(sample_variance(x.array().square().matrix()) / 1e5);
        CHECK(std::fabs(second - 1.0) <= 3.0 * se);
    }
}

TEST_CASE("output channels") {
    SUBCASE("noiseless awgn returns z exactly") {
        VectorXd z(3);
        z << 1.0, -2.0, 0.5;
        const auto [y, w] = apply_output_channel(z, AwgnParams{0.0}, 4);
        CHECK((y - z).cwiseAbs().maxCoeff() == 0.0);
        CHECK(w.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("awgn residual variance matches sigma_sq") {
        const VectorXd z = VectorXd::Zero(20000);
        const auto [y, w] = apply_output_channel(z, AwgnParams{0.3}, 8);
        CHECK((y - z).squaredNorm() / 2e4 == doctest::Approx(0.3).epsilon(0.05));
        CHECK((y - z - w).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("constant-rate poisson has the right mean") {
        PoissonLnpParams lnp;
        lnp.lambda_z = (VectorXd(3) << std::log(3.0), 0.0, 0.0).finished();
        const VectorXd z = VectorXd::Random(100000);
        const auto [y, w] = apply_output_channel(z, lnp, 13);
        CHECK(y.mean() == doctest::Approx(3.0).epsilon(0.1 / 3.0));
        CHECK(y.minCoeff() >= 0.0);
        // w stores the generating uniform; inversion identity holds below the
        // PTRS threshold
        for (Eigen::Index i = 0; i < 50; ++i) {
            CHECK(y[i] == static_cast<double>(poisson_inverse_cdf(3.0, w[i])));
        }
    }
    SUBCASE("lnp rate at z = 0 with the fig-3 coefficients") {
        const VectorXd lambda = (VectorXd(3) << -4.88, 7.41, 2.58).finished();
        const double expected = std::exp(-4.88 + 7.41 * 0.5 + 2.58 * 0.25);
        CHECK(lnp_rate(0.0, lambda) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("rate overflow reports the offending index") {
        PoissonLnpParams lnp;
        lnp.lambda_z = (VectorXd(1) << 1e6).finished();  // exp(1e6) overflows
        VectorXd z(2);
        z << 0.0, 1.0;
        CHECK_THROWS_AS(apply_output_channel(z, lnp, 1), ChannelOverflowError);
        try {
            apply_output_channel(z, lnp, 1);
        } catch (const ChannelOverflowError& e) {
            CHECK(e.index == 0);
        }
    }
}

TEST_CASE("instance generation is reproducible and self-consistent") {
    const InputParams in{0.2, 5.0};
    const ProblemInstance a = generate_instance(60, 80, in, AwgnParams{0.1}, 21);
    const ProblemInstance b = generate_instance(60, 80, in, AwgnParams{0.1}, 21);
    CHECK((a.a_matrix - b.a_matrix).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.x_true - b.x_true).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y_obs - b.y_obs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z_true - a.a_matrix * a.x_true).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y_obs - a.z_true - a.w_noise).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("instance persistence round-trips") {
    const InputParams in{0.3, 2.0};
    const ProblemInstance inst = generate_instance(12, 16, in, AwgnParams{0.25}, 31);

    SUBCASE("inline json") {
        const std::string path = temp_path("agamp_inline.json");
        save_instance(inst, path, /*inline_threshold=*/100000);
        const ProblemInstance back = load_instance(path);
        CHECK((inst.a_matrix - back.a_matrix).cwiseAbs().maxCoeff() == 0.0);
        CHECK((inst.y_obs - back.y_obs).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back.seed == inst.seed);
        CHECK(back.lambda_x_true.rho == inst.lambda_x_true.rho);
    }
    SUBCASE("binary sidecar") {
        const std::string path = temp_path("agamp_sidecar.json");
        save_instance(inst, path, /*inline_threshold=*/1);
        const ProblemInstance back = load_instance(path);
        CHECK((inst.a_matrix - back.a_matrix).cwiseAbs().maxCoeff() == 0.0);
        CHECK((inst.w_noise - back.w_noise).cwiseAbs().maxCoeff() == 0.0);
        CHECK(std::get<AwgnParams>(back.lambda_z_true).sigma_sq == 0.25);
    }
    SUBCASE("poisson params round-trip") {
        PoissonLnpParams lnp;
        lnp.lambda_z = (VectorXd(3) << -4.88, 7.41, 2.58).finished();
        const ProblemInstance pi = generate_instance(10, 8, in, lnp, 5);
        const std::string path = temp_path("agamp_lnp.json");
        save_instance(pi, path, 100000);
        const ProblemInstance back = load_instance(path);
        CHECK(inf_norm_diff(std::get<PoissonLnpParams>(back.lambda_z_true).lambda_z,
                            lnp.lambda_z) == 0.0);
    }
    SUBCASE("csv export") {
        const std::string path = temp_path("agamp_inst.csv");
        export_instance_csv(inst, path);
        std::ifstream in_file(path);
        std::string header;
        std::getline(in_file, header);
        CHECK(header == "kind,index,value");
        int lines = 0;
        std::string line;
        while (std::getline(in_file, line)) ++lines;
        CHECK(lines == inst.n() + inst.m());
    }
}

TEST_SUITE_END();
