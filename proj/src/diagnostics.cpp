#include "agamp/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace agamp {

namespace {

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
};

MeanStderr function_average(const Eigen::MatrixXd& population, const TestFunction& fn) {
    const Eigen::Index n = population.rows();
    double sum = 0.0, sum_sq = 0.0;
    Eigen::RowVectorXd row(population.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        row = population.row(i);
        const double v = fn.phi(row);
        sum += v;
        sum_sq += v * v;
    }
    const auto dn = static_cast<double>(n);
    MeanStderr out;
    out.mean = sum / dn;
    out.stderr_ = std::sqrt(std::max(sum_sq / dn - out.mean * out.mean, 0.0) / dn);
    return out;
}

}  // namespace

TestFunctionSuite::TestFunctionSuite(std::vector<TestFunction> functions, int arity,
                                     std::uint64_t check_seed)
    : functions_(std::move(functions)), arity_(arity) {
    if (functions_.empty()) throw ConfigError("TestFunctionSuite: empty suite");
    if (arity_ < 1) throw ConfigError("TestFunctionSuite: arity must be >= 1");

    // Numerical PL(2) bound check on random pairs in a +-10 box.
    CounterRng rng(check_seed, kStreamDiagnostics);
    Eigen::RowVectorXd a(arity_), b(arity_);
    for (const auto& fn : functions_) {
        for (int trial = 0; trial < 2000; ++trial) {
            for (int k = 0; k < arity_; ++k) {
                a[k] = 20.0 * rng.next_double() - 10.0;
                b[k] = 20.0 * rng.next_double() - 10.0;
            }
            const double dist = (a - b).norm();
            if (dist < 1e-9) continue;
            const double bound = fn.lipschitz * (1.0 + a.norm() + b.norm()) * dist;
            if (std::fabs(fn.phi(a) - fn.phi(b)) > bound) {
                throw ConfigError("TestFunctionSuite: function '" + fn.name +
                                  "' violates the PL(2) bound");
            }
        }
    }
}

TestFunctionSuite TestFunctionSuite::input_suite() {
    std::vector<TestFunction> fns;
    fns.push_back({"sq_err",
                   [](const Eigen::RowVectorXd& t) { return (t[0] - t[2]) * (t[0] - t[2]); },
                   4.0});
    fns.push_back({"x_sq", [](const Eigen::RowVectorXd& t) { return t[0] * t[0]; }, 2.0});
    fns.push_back({"xhat_sq", [](const Eigen::RowVectorXd& t) { return t[2] * t[2]; }, 2.0});
    fns.push_back({"x_xhat", [](const Eigen::RowVectorXd& t) { return t[0] * t[2]; }, 2.0});
    fns.push_back({"r_sq", [](const Eigen::RowVectorXd& t) { return t[1] * t[1]; }, 2.0});
    // smooth support detector on x: sigmoid((|x| - 0.1) / 0.05)
    fns.push_back({"support",
                   [](const Eigen::RowVectorXd& t) {
                       return 1.0 / (1.0 + std::exp(-(std::fabs(t[0]) - 0.1) / 0.05));
                   },
                   20.0});
    return TestFunctionSuite(std::move(fns), 3);
}

TestFunctionSuite TestFunctionSuite::output_suite() {
    std::vector<TestFunction> fns;
    fns.push_back({"z_sq_err",
                   [](const Eigen::RowVectorXd& t) { return (t[0] - t[1]) * (t[0] - t[1]); },
                   4.0});
    fns.push_back({"z_sq", [](const Eigen::RowVectorXd& t) { return t[0] * t[0]; }, 2.0});
    fns.push_back({"p_sq", [](const Eigen::RowVectorXd& t) { return t[3] * t[3]; }, 2.0});
    fns.push_back({"z_p", [](const Eigen::RowVectorXd& t) { return t[0] * t[3]; }, 2.0});
    fns.push_back({"y_mean", [](const Eigen::RowVectorXd& t) { return t[2]; }, 1.0});
    return TestFunctionSuite(std::move(fns), 4);
}

std::vector<PlComparison> pl2_compare(const Eigen::MatrixXd& empirical,
                                      const Eigen::MatrixXd& predicted,
                                      const TestFunctionSuite& suite) {
    if (empirical.rows() < 1 || predicted.rows() < 1) {
        throw DomainError("pl2_compare: empty population");
    }
    if (empirical.cols() != suite.arity() || predicted.cols() != suite.arity()) {
        throw DomainError("pl2_compare: tuple arity mismatch");
    }

    std::vector<PlComparison> report;
    report.reserve(suite.functions().size());
    for (const auto& fn : suite.functions()) {
        const MeanStderr emp = function_average(empirical, fn);
        const MeanStderr pred = function_average(predicted, fn);
        PlComparison row;
        row.name = fn.name;
        row.empirical_mean = emp.mean;
        row.predicted_mean = pred.mean;
        const double se = std::sqrt(emp.stderr_ * emp.stderr_ + pred.stderr_ * pred.stderr_);
        row.z_score = (se > 0.0) ? (emp.mean - pred.mean) / se : 0.0;
        report.push_back(std::move(row));
    }
    return report;
}

std::vector<PlComparison> pl2_compare(const Eigen::MatrixXd& empirical, const TupleSampler& sampler,
                                      const TestFunctionSuite& suite, int mc_samples,
                                      std::uint64_t seed) {
    if (mc_samples < 1000) throw ConfigError("pl2_compare: need at least 1000 MC samples");
    Eigen::MatrixXd predicted(mc_samples, suite.arity());
    Eigen::RowVectorXd row(suite.arity());
    for (int i = 0; i < mc_samples; ++i) {
        CounterRng rng(seed, kStreamDiagnostics, static_cast<std::uint64_t>(i) + 1);
        sampler(rng, row);
        predicted.row(i) = row;
    }
    return pl2_compare(empirical, predicted, suite);
}

TupleSampler make_theta_x_sampler(const SeState& state, const InputChannel& channel,
                                  const InputParams& lambda_x_true) {
    const double tau_r = state.tau_r_bar;
    const double noise_sd = std::sqrt(state.xi_r);
    const double alpha = state.alpha_r;
    const InputParams lambda_hat = state.lambda_x_bar;
    return [&channel, lambda_x_true, lambda_hat, tau_r, noise_sd, alpha](
               CounterRng& rng, Eigen::RowVectorXd& out) {
        const double x = channel.sample_x(lambda_x_true, rng);
        const double r = alpha * x + noise_sd * rng.next_normal();
        out[0] = x;
        out[1] = r;
        out[2] = channel.posterior(r, tau_r, lambda_hat).mean;
    };
}

std::vector<ParameterErrorRow> parameter_consistency_report(
    const std::vector<GampIterationRecord>& trajectory, const InputParams& truth_x,
    const OutputParams& truth_z) {
    std::vector<ParameterErrorRow> rows;
    rows.reserve(trajectory.size());
    for (const auto& rec : trajectory) {
        ParameterErrorRow row;
        row.iter = rec.iter;
        row.rho_err = std::fabs(rec.lambda_x_hat.rho - truth_x.rho);
        row.sigma_x_sq_rel_err =
            std::fabs(rec.lambda_x_hat.sigma_x_sq - truth_x.sigma_x_sq) / truth_x.sigma_x_sq;
        if (const auto* awgn = std::get_if<AwgnParams>(&truth_z)) {
            const auto* hat = std::get_if<AwgnParams>(&rec.lambda_z_hat);
            row.lambda_z_inf_err =
                hat != nullptr ? std::fabs(hat->sigma_sq - awgn->sigma_sq) : 0.0;
        } else {
            const auto& truth = std::get<PoissonLnpParams>(truth_z).lambda_z;
            const auto* hat = std::get_if<PoissonLnpParams>(&rec.lambda_z_hat);
            row.lambda_z_inf_err = hat != nullptr ? inf_norm_diff(hat->lambda_z, truth) : 0.0;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_parameter_report_csv(const std::vector<ParameterErrorRow>& rows,
                                const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_parameter_report_csv: cannot open " + path);
    out << "iter,rho_err,sigma_x_sq_rel_err,lambda_z_inf_err\n";
    char buf[64];
    for (const auto& row : rows) {
        out << row.iter << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.rho_err);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.sigma_x_sq_rel_err);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.lambda_z_inf_err);
        out << buf << '\n';
    }
    if (!out) throw IoError("write_parameter_report_csv: write failed");
}

void write_pl_report_csv(const std::vector<std::vector<PlComparison>>& per_iteration,
                         const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("write_pl_report_csv: cannot open " + path);
    out << "iter,function,empirical_mean,predicted_mean,z_score\n";
    char buf[64];
    for (std::size_t t = 0; t < per_iteration.size(); ++t) {
        for (const auto& row : per_iteration[t]) {
            out << t + 1 << ',' << row.name << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row.empirical_mean);
            out << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row.predicted_mean);
            out << buf << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", row.z_score);
            out << buf << '\n';
        }
    }
    if (!out) throw IoError("write_pl_report_csv: write failed");
}

std::string summarize_pl_report(const std::vector<std::vector<PlComparison>>& per_iteration,
                                double z_threshold) {
    std::size_t total = 0, within = 0;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& rows : per_iteration) {
        for (const auto& row : rows) {
            ++total;
            if (std::fabs(row.z_score) <= z_threshold) ++within;
            if (std::fabs(row.z_score) > std::fabs(worst)) {
                worst = row.z_score;
                worst_name = row.name;
            }
        }
    }
    std::ostringstream os;
    os << "pl2 comparison: " << within << "/" << total << " averages within |z| <= "
       << z_threshold;
    if (total > 0) {
        os << "; worst z = " << worst << " (" << worst_name << ")";
    }
    os << "\n";
    return os.str();
}

}  // namespace agamp
