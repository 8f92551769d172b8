#include "agamp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "agamp/diagnostics.hpp"
#include "agamp/model.hpp"
#include "agamp/parallel.hpp"

namespace agamp {

using nlohmann::json;
namespace fs = std::filesystem;

double to_db(double x) { return 10.0 * std::log10(std::max(x, 1e-300)); }

void ExperimentConfig::validate() const {
    if (experiment != "fig2a" && experiment != "fig2b" && experiment != "fig3" &&
        experiment != "single" && experiment != "se") {
        throw ConfigError("ExperimentConfig: unknown experiment '" + experiment + "'");
    }
    if (n < 1) throw ConfigError("ExperimentConfig: n must be >= 1");
    if (trials < 1) throw ConfigError("ExperimentConfig: trials must be >= 1");
    if (!(mn_ratio > 0.0)) throw ConfigError("ExperimentConfig: mn_ratio must be > 0");
    if (sweep_name != "mn_ratio" && sweep_name != "sigma_sq") {
        throw ConfigError("ExperimentConfig: sweep_name must be mn_ratio or sigma_sq");
    }
    if ((experiment == "fig2a" || experiment == "fig2b" || experiment == "fig3") && sweep.empty()) {
        throw ConfigError("ExperimentConfig: sweep grid must be nonempty");
    }
    if (adaptation != "oracle" && adaptation != "em" && adaptation != "em+ml") {
        throw ConfigError("ExperimentConfig: adaptation must be oracle, em or em+ml");
    }
    if (adaptation == "em+ml" && !is_poisson_lnp(lambda_z)) {
        throw ConfigError("ExperimentConfig: em+ml requires the poisson_lnp channel");
    }
    lambda_x.validate();
    agamp::validate(lambda_z);
    em.validate();
    ml.validate();
    lasso.validate();
}

Eigen::Index ExperimentConfig::m_for_ratio(double ratio) const {
    const auto m = static_cast<Eigen::Index>(std::llround(ratio * static_cast<double>(n)));
    if (m < 1) throw ConfigError("ExperimentConfig: m/n ratio yields empty measurement");
    return m;
}

ExperimentConfig preset_config(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "fig2a") {
        cfg.n = 400;
        cfg.lambda_x = {0.2, 5.0};
        cfg.lambda_z = AwgnParams{0.1};
        cfg.sweep_name = "mn_ratio";
        cfg.sweep = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        cfg.trials = 1000;
        cfg.adaptation = "em";
        cfg.with_lasso = true;
    } else if (experiment == "fig2b") {
        cfg.n = 400;
        cfg.lambda_x = {0.2, 5.0};
        cfg.lambda_z = AwgnParams{0.1};
        cfg.mn_ratio = 0.75;
        cfg.sweep_name = "sigma_sq";
        cfg.sweep = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
        cfg.trials = 1000;
        cfg.adaptation = "em";
        cfg.with_lasso = true;
    } else if (experiment == "fig3") {
        cfg.n = 1000;
        cfg.lambda_x = {0.1, 30.0};
        PoissonLnpParams lnp;
        lnp.lambda_z = (VectorXd(3) << -4.88, 7.41, 2.58).finished();
        cfg.lambda_z = lnp;
        cfg.sweep_name = "mn_ratio";
        cfg.sweep = {1.0, 2.0, 4.0, 6.0};
        cfg.trials = 100;
        cfg.adaptation = "em+ml";
        cfg.with_lasso = false;
        // identifiability: a symmetric Z marginal cannot tell lambda from its
        // u -> 1-u reflection, so Lambda_z pins the linear coefficient >= 0
        cfg.ml.box_lo = {-20.0, 0.0, -20.0};
        cfg.ml.box_hi = {20.0, 20.0, 20.0};
    } else if (experiment == "single" || experiment == "se") {
        cfg.n = 400;
        cfg.lambda_x = {0.2, 5.0};
        cfg.lambda_z = AwgnParams{0.1};
        cfg.mn_ratio = 0.75;
        cfg.adaptation = "em";
    } else {
        throw ConfigError("preset_config: unknown experiment '" + experiment + "'");
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config_file: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("load_config_file: " + std::string(e.what()));
    }

    ExperimentConfig cfg = preset_config(doc.value("experiment", std::string("single")));
    if (doc.contains("n")) cfg.n = doc["n"].get<Eigen::Index>();
    if (doc.contains("mn_ratio")) cfg.mn_ratio = doc["mn_ratio"].get<double>();
    if (doc.contains("sweep_name")) cfg.sweep_name = doc["sweep_name"].get<std::string>();
    if (doc.contains("sweep")) cfg.sweep = doc["sweep"].get<std::vector<double>>();
    if (doc.contains("lambda_x")) {
        cfg.lambda_x.rho = doc["lambda_x"].value("rho", cfg.lambda_x.rho);
        cfg.lambda_x.sigma_x_sq = doc["lambda_x"].value("sigma_x_sq", cfg.lambda_x.sigma_x_sq);
    }
    if (doc.contains("output")) {
        const auto& out = doc["output"];
        const std::string kind = out.value("kind", std::string("awgn"));
        if (kind == "awgn") {
            cfg.lambda_z = AwgnParams{out.value("sigma_sq", 0.1)};
        } else if (kind == "poisson_lnp") {
            PoissonLnpParams lnp;
            const auto coeffs = out.at("lambda_z").get<std::vector<double>>();
            lnp.lambda_z = Eigen::Map<const VectorXd>(coeffs.data(),
                                                      static_cast<Eigen::Index>(coeffs.size()));
            cfg.lambda_z = lnp;
        } else {
            throw ConfigError("load_config_file: unknown output kind '" + kind + "'");
        }
    }
    if (doc.contains("trials")) cfg.trials = doc["trials"].get<int>();
    if (doc.contains("seed_base")) cfg.seed_base = doc["seed_base"].get<std::uint64_t>();
    if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();
    if (doc.contains("workers")) cfg.workers = doc["workers"].get<int>();
    if (doc.contains("adaptation")) cfg.adaptation = doc["adaptation"].get<std::string>();
    if (doc.contains("with_lasso")) cfg.with_lasso = doc["with_lasso"].get<bool>();
    if (doc.contains("with_se")) cfg.with_se = doc["with_se"].get<bool>();
    if (doc.contains("max_iters")) cfg.max_iters = doc["max_iters"].get<int>();
    if (doc.contains("stop_tol")) cfg.stop_tol = doc["stop_tol"].get<double>();
    if (doc.contains("se_samples")) cfg.se_samples = doc["se_samples"].get<int>();
    if (doc.contains("se_iters")) cfg.se_iters = doc["se_iters"].get<int>();
    if (doc.contains("se_seed")) cfg.se_seed = doc["se_seed"].get<std::uint64_t>();
    if (doc.contains("em")) {
        cfg.em.max_em_iters = doc["em"].value("max_em_iters", cfg.em.max_em_iters);
        cfg.em.tol = doc["em"].value("tol", cfg.em.tol);
    }
    if (doc.contains("ml")) {
        cfg.ml.max_ascent_iters = doc["ml"].value("max_ascent_iters", cfg.ml.max_ascent_iters);
        cfg.ml.step_init = doc["ml"].value("step_init", cfg.ml.step_init);
        cfg.ml.tol = doc["ml"].value("tol", cfg.ml.tol);
        if (doc["ml"].contains("box_lo")) {
            const auto& b = doc["ml"]["box_lo"];
            cfg.ml.box_lo = b.is_array() ? b.get<std::vector<double>>()
                                         : std::vector<double>{b.get<double>()};
        }
        if (doc["ml"].contains("box_hi")) {
            const auto& b = doc["ml"]["box_hi"];
            cfg.ml.box_hi = b.is_array() ? b.get<std::vector<double>>()
                                         : std::vector<double>{b.get<double>()};
        }
        cfg.ml.quad_order = doc["ml"].value("quad_order", cfg.ml.quad_order);
    }
    if (doc.contains("lasso")) {
        cfg.lasso.max_iters = doc["lasso"].value("max_iters", cfg.lasso.max_iters);
        cfg.lasso.tol = doc["lasso"].value("tol", cfg.lasso.tol);
        cfg.lasso.grid_size = doc["lasso"].value("grid_size", cfg.lasso.grid_size);
        cfg.lasso.grid_lo = doc["lasso"].value("grid_lo", cfg.lasso.grid_lo);
        cfg.lasso.grid_hi = doc["lasso"].value("grid_hi", cfg.lasso.grid_hi);
    }
    cfg.validate();
    return cfg;
}

RunSetup make_run_setup(const ExperimentConfig& config, const ProblemInstance& instance,
                        bool oracle) {
    RunSetup setup;
    setup.gamp.max_iters = config.max_iters;
    setup.gamp.stop_tol = config.stop_tol;

    const OracleStrategy truth{instance.lambda_x_true, instance.lambda_z_true};
    if (oracle || config.adaptation == "oracle") {
        setup.gamp.input_adaptation = truth;
        setup.gamp.output_adaptation = truth;
        setup.initial_x = instance.lambda_x_true;
        setup.initial_z = instance.lambda_z_true;
        return setup;
    }

    setup.gamp.input_adaptation = config.em;
    if (config.adaptation == "em+ml") {
        setup.gamp.output_adaptation = config.ml;
        // Prior known at t = 0; lambda_z starts from the box center.
        setup.initial_x = instance.lambda_x_true;
        const auto r = std::get<PoissonLnpParams>(instance.lambda_z_true).lambda_z.size();
        PoissonLnpParams start;
        start.lambda_z.resize(r);
        for (Eigen::Index k = 0; k < r; ++k) {
            start.lambda_z[k] = 0.5 * (config.ml.lo(k) + config.ml.hi(k));
        }
        setup.initial_z = start;
    } else {
        setup.gamp.output_adaptation = truth;  // sigma^2 is known in the AWGN experiments
        const auto m = static_cast<double>(instance.m());
        const double y_mean = instance.y_obs.mean();
        const double y_var =
            (instance.y_obs.array() - y_mean).square().sum() / std::max(m, 1.0);
        setup.initial_x.rho = 0.5;
        setup.initial_x.sigma_x_sq =
            std::max(y_var * m / static_cast<double>(instance.n()), 1e-6);
        setup.initial_z = instance.lambda_z_true;
    }
    return setup;
}

namespace {

struct TrialRecord {
    double mse_adaptive = std::numeric_limits<double>::quiet_NaN();
    double mse_oracle = std::numeric_limits<double>::quiet_NaN();
    double mse_lasso = std::numeric_limits<double>::quiet_NaN();
    bool adaptive_diverged = false;
    bool oracle_diverged = false;
    InputParams lambda_x_hat;
    VectorXd lambda_z_hat;
};

MethodSummary summarize(const std::string& method, const std::vector<double>& per_trial,
                        int diverged) {
    MethodSummary s;
    s.method = method;
    s.diverged = diverged;
    s.per_trial_mse = per_trial;
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (double v : per_trial) {
        if (!std::isfinite(v)) continue;
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    s.trials = count;
    if (count > 0) {
        s.mse_mean = sum / count;
        const double var = std::max(sum_sq / count - s.mse_mean * s.mse_mean, 0.0);
        s.mse_stderr = (count > 1) ? std::sqrt(var / count) : 0.0;
    }
    return s;
}

void csv_put(std::ofstream& out, double v, char sep) {
    if (!std::isfinite(v)) {
        out << sep;
        return;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << sep;
}

OutputParams point_output_params(const ExperimentConfig& config, double sweep_value) {
    if (config.sweep_name == "sigma_sq") return AwgnParams{sweep_value};
    return config.lambda_z;
}

}  // namespace

const MethodSummary& SweepPointResult::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.method == name) return m;
    }
    throw ConfigError("SweepPointResult: no method '" + name + "'");
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    if (config.sweep.empty()) throw ConfigError("run_sweep: sweep grid must be nonempty");

    // Fail on an unwritable output location before any computation.
    fs::create_directories(config.out_dir);
    const std::string csv_path =
        (fs::path(config.out_dir) / (config.experiment + "_sweep.csv")).string();
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("run_sweep: cannot open " + csv_path);

    const bool run_adaptive = config.adaptation != "oracle";

    SweepResult result;
    result.csv_path = csv_path;

    for (double sweep_value : config.sweep) {
        SweepPointResult point;
        point.sweep_value = sweep_value;
        const double ratio = (config.sweep_name == "mn_ratio") ? sweep_value : config.mn_ratio;
        point.m = config.m_for_ratio(ratio);
        const OutputParams lambda_z_point = point_output_params(config, sweep_value);

        std::vector<TrialRecord> records(static_cast<std::size_t>(config.trials));
        const int gen_workers = (config.workers > 1) ? 1 : config.workers;
        parallel_for(config.trials, config.workers, [&](std::int64_t t) {
            TrialRecord& rec = records[static_cast<std::size_t>(t)];
            const ProblemInstance instance =
                generate_instance(point.m, config.n, config.lambda_x, lambda_z_point,
                                  config.seed_base + static_cast<std::uint64_t>(t), gen_workers);

            const RunSetup oracle_setup = make_run_setup(config, instance, /*oracle=*/true);
            try {
                rec.mse_oracle =
                    gamp_run(instance, oracle_setup.gamp, oracle_setup.initial_x,
                             oracle_setup.initial_z)
                        .mse;
            } catch (const DivergenceError&) {
                rec.oracle_diverged = true;
            }

            if (run_adaptive) {
                const RunSetup setup = make_run_setup(config, instance, /*oracle=*/false);
                try {
                    const GampResult run =
                        gamp_run(instance, setup.gamp, setup.initial_x, setup.initial_z);
                    rec.mse_adaptive = run.mse;
                    rec.lambda_x_hat = run.state.lambda_x_hat;
                    if (const auto* lnp =
                            std::get_if<PoissonLnpParams>(&run.state.lambda_z_hat)) {
                        rec.lambda_z_hat = lnp->lambda_z;
                    }
                } catch (const DivergenceError&) {
                    rec.adaptive_diverged = true;
                }
            }

            if (config.with_lasso) {
                rec.mse_lasso = lasso_oracle_tune(instance, config.lasso).mse;
            }
        });

        // Aggregate in trial order regardless of completion order.
        std::vector<double> adaptive_mse, oracle_mse, lasso_mse;
        int adaptive_div = 0, oracle_div = 0;
        double rho_sum = 0.0, sigma_sum = 0.0;
        VectorXd lambda_z_sum;
        int adaptive_ok = 0;
        for (const auto& rec : records) {
            oracle_mse.push_back(rec.mse_oracle);
            oracle_div += rec.oracle_diverged ? 1 : 0;
            if (run_adaptive) {
                adaptive_mse.push_back(rec.mse_adaptive);
                adaptive_div += rec.adaptive_diverged ? 1 : 0;
                if (!rec.adaptive_diverged) {
                    ++adaptive_ok;
                    rho_sum += rec.lambda_x_hat.rho;
                    sigma_sum += rec.lambda_x_hat.sigma_x_sq;
                    if (rec.lambda_z_hat.size() > 0) {
                        if (lambda_z_sum.size() == 0) lambda_z_sum = VectorXd::Zero(rec.lambda_z_hat.size());
                        lambda_z_sum += rec.lambda_z_hat;
                    }
                }
            }
            if (config.with_lasso) lasso_mse.push_back(rec.mse_lasso);
        }

        if (run_adaptive) {
            MethodSummary s = summarize("adaptive", adaptive_mse, adaptive_div);
            if (adaptive_ok > 0) {
                s.rho_hat_mean = rho_sum / adaptive_ok;
                s.sigma_x_sq_hat_mean = sigma_sum / adaptive_ok;
                if (lambda_z_sum.size() > 0) s.lambda_z_hat_mean = lambda_z_sum / adaptive_ok;
            }
            point.methods.push_back(std::move(s));
        }
        {
            MethodSummary s = summarize("oracle", oracle_mse, oracle_div);
            s.rho_hat_mean = config.lambda_x.rho;
            s.sigma_x_sq_hat_mean = config.lambda_x.sigma_x_sq;
            point.methods.push_back(std::move(s));
        }
        if (config.with_lasso) {
            point.methods.push_back(summarize("lasso", lasso_mse, 0));
        }

        if (config.with_se) {
            GaussBernoulliInput input_channel;
            auto output_channel = make_output_channel(lambda_z_point);
            SeProblem se_problem{input_channel,
                                 *output_channel,
                                 config.lambda_x,
                                 lambda_z_point,
                                 static_cast<double>(config.n) / static_cast<double>(point.m),
                                 OracleStrategy{config.lambda_x, lambda_z_point},
                                 OracleStrategy{config.lambda_x, lambda_z_point},
                                 config.lambda_x,
                                 lambda_z_point};
            SeRunConfig se_run_cfg;
            se_run_cfg.max_iters = config.se_iters;
            MonteCarloConfig mc{config.se_samples, config.se_seed};
            const SeRunResult se = se_run(se_problem, se_run_cfg, mc);
            MethodSummary s;
            s.method = "se";
            s.trials = 0;
            s.mse_mean = se.predicted_mse.back();
            s.mse_stderr = se.mse_stderr.back();
            point.methods.push_back(std::move(s));
        }

        result.points.push_back(std::move(point));
    }

    // One row per (sweep point, method); see SCHEMA.md.
    csv << "schema_version,experiment,sweep_name,sweep_value,m,n,method,trials,diverged,"
           "mse_mean,mse_stderr,mse_mean_db,mse_stderr_db,rho_hat_mean,sigma_x_sq_hat_mean,"
           "lambda_z_hat_0,lambda_z_hat_1,lambda_z_hat_2\n";
    for (const auto& point : result.points) {
        for (const auto& m : point.methods) {
            csv << 1 << ',' << config.experiment << ',' << config.sweep_name << ',';
            csv_put(csv, point.sweep_value, ',');
            csv << point.m << ',' << config.n << ',' << m.method << ',' << m.trials << ','
                << m.diverged << ',';
            csv_put(csv, m.mse_mean, ',');
            csv_put(csv, m.mse_stderr, ',');
            csv_put(csv, to_db(m.mse_mean), ',');
            const double db_stderr =
                (m.mse_mean > 0.0) ? 10.0 / std::log(10.0) * m.mse_stderr / m.mse_mean
                                   : std::numeric_limits<double>::quiet_NaN();
            csv_put(csv, db_stderr, ',');
            csv_put(csv, m.rho_hat_mean, ',');
            csv_put(csv, m.sigma_x_sq_hat_mean, ',');
            for (int k = 0; k < 3; ++k) {
                const double v = (m.lambda_z_hat_mean.size() > k)
                                     ? m.lambda_z_hat_mean[k]
                                     : std::numeric_limits<double>::quiet_NaN();
                csv_put(csv, v, k < 2 ? ',' : '\n');
            }
        }
    }
    if (!csv) throw IoError("run_sweep: write failed: " + csv_path);
    return result;
}

SingleRunOutput run_single(const ExperimentConfig& config, bool oracle) {
    config.validate();
    fs::create_directories(config.out_dir);

    const Eigen::Index m = config.m_for_ratio(config.mn_ratio);
    const ProblemInstance instance = generate_instance(m, config.n, config.lambda_x,
                                                       config.lambda_z, config.seed_base,
                                                       config.workers);
    RunSetup setup = make_run_setup(config, instance, oracle);
    setup.gamp.record_trajectory = true;

    const auto start = std::chrono::steady_clock::now();
    SingleRunOutput out;
    out.result = gamp_run(instance, setup.gamp, setup.initial_x, setup.initial_z);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string tag = oracle ? "oracle" : config.adaptation;
    out.trajectory_csv =
        (fs::path(config.out_dir) / ("single_" + tag + "_trajectory.csv")).string();
    write_trajectory_csv(out.result.trajectory, out.trajectory_csv);

    json summary;
    summary["experiment"] = config.experiment;
    summary["method"] = tag;
    summary["n"] = config.n;
    summary["m"] = m;
    summary["seed"] = config.seed_base;
    summary["final_mse"] = out.result.mse;
    summary["final_mse_db"] = to_db(out.result.mse);
    summary["iterations"] = out.result.iterations;
    summary["converged"] = out.result.converged;
    summary["rho_hat"] = out.result.state.lambda_x_hat.rho;
    summary["sigma_x_sq_hat"] = out.result.state.lambda_x_hat.sigma_x_sq;
    if (const auto* lnp = std::get_if<PoissonLnpParams>(&out.result.state.lambda_z_hat)) {
        summary["lambda_z_hat"] =
            std::vector<double>(lnp->lambda_z.begin(), lnp->lambda_z.end());
    }
    summary["wall_time_sec"] = wall;

    out.summary_json = (fs::path(config.out_dir) / ("single_" + tag + "_summary.json")).string();
    std::ofstream js(out.summary_json, std::ios::trunc);
    if (!js) throw IoError("run_single: cannot open " + out.summary_json);
    js << summary.dump(2) << "\n";
    return out;
}

SeRunOutput run_se_experiment(const ExperimentConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    const Eigen::Index m = config.m_for_ratio(config.mn_ratio);
    const double beta = static_cast<double>(config.n) / static_cast<double>(m);

    GaussBernoulliInput input_channel;
    auto output_channel = make_output_channel(config.lambda_z);

    SeProblem problem{input_channel, *output_channel, config.lambda_x, config.lambda_z, beta,
                      OracleStrategy{config.lambda_x, config.lambda_z},
                      OracleStrategy{config.lambda_x, config.lambda_z},
                      config.lambda_x, config.lambda_z};
    if (config.adaptation == "em" || config.adaptation == "em+ml") {
        problem.input_adaptation = config.em;
    }
    if (config.adaptation == "em+ml") {
        problem.output_adaptation = config.ml;
        const auto r = std::get<PoissonLnpParams>(config.lambda_z).lambda_z.size();
        PoissonLnpParams start;
        start.lambda_z.resize(r);
        for (Eigen::Index k = 0; k < r; ++k) {
            start.lambda_z[k] = 0.5 * (config.ml.lo(k) + config.ml.hi(k));
        }
        problem.initial_lambda_z = start;
    }

    SeRunConfig run_cfg;
    run_cfg.max_iters = config.se_iters;
    run_cfg.early_stop = false;  // emit exactly se_iters rows
    MonteCarloConfig mc{config.se_samples, config.se_seed};

    const auto start = std::chrono::steady_clock::now();
    SeRunOutput out;
    out.result = se_run(problem, run_cfg, mc);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    out.trajectory_csv = (fs::path(config.out_dir) / "se_trajectory.csv").string();
    write_se_trajectory_csv(out.result, out.trajectory_csv);

    json summary;
    summary["experiment"] = config.experiment;
    summary["adaptation"] = config.adaptation;
    summary["beta"] = beta;
    summary["iterations"] = out.result.states.size();
    summary["predicted_mse"] = out.result.predicted_mse.back();
    summary["predicted_mse_db"] = to_db(out.result.predicted_mse.back());
    summary["mse_stderr"] = out.result.mse_stderr.back();
    summary["wall_time_sec"] = wall;
    out.summary_json = (fs::path(config.out_dir) / "se_summary.json").string();
    std::ofstream js(out.summary_json, std::ios::trunc);
    if (!js) throw IoError("run_se_experiment: cannot open " + out.summary_json);
    js << summary.dump(2) << "\n";
    return out;
}

DiagnoseOutput run_diagnose(const ExperimentConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    const Eigen::Index m = config.m_for_ratio(config.mn_ratio);
    const double beta = static_cast<double>(config.n) / static_cast<double>(m);
    const ProblemInstance instance = generate_instance(m, config.n, config.lambda_x,
                                                       config.lambda_z, config.seed_base,
                                                       config.workers);

    // Oracle run with populations kept per iteration, for the z-score suite.
    RunSetup oracle_setup = make_run_setup(config, instance, /*oracle=*/true);
    oracle_setup.gamp.record_trajectory = true;
    oracle_setup.gamp.record_populations = true;
    const GampResult oracle_run =
        gamp_run(instance, oracle_setup.gamp, oracle_setup.initial_x, oracle_setup.initial_z);

    // Matching SE trajectory, one state per completed GAMP iteration.
    GaussBernoulliInput input_channel;
    auto output_channel = make_output_channel(config.lambda_z);
    SeProblem se_problem{input_channel, *output_channel, config.lambda_x, config.lambda_z, beta,
                         OracleStrategy{config.lambda_x, config.lambda_z},
                         OracleStrategy{config.lambda_x, config.lambda_z},
                         config.lambda_x, config.lambda_z};
    SeRunConfig se_cfg;
    se_cfg.max_iters = oracle_run.iterations;
    se_cfg.early_stop = false;
    MonteCarloConfig mc{config.se_samples, config.se_seed};
    const SeRunResult se = se_run(se_problem, se_cfg, mc);

    const TestFunctionSuite suite = TestFunctionSuite::input_suite();
    std::vector<std::vector<PlComparison>> per_iteration;
    int within = 0;
    for (int t = 0; t < oracle_run.iterations; ++t) {
        const auto& rec = oracle_run.trajectory[static_cast<std::size_t>(t)];
        Eigen::MatrixXd population(config.n, 3);
        population.col(0) = instance.x_true;
        population.col(1) = rec.r_copy;
        population.col(2) = rec.x_hat_copy;
        const TupleSampler sampler = make_theta_x_sampler(se.states[static_cast<std::size_t>(t)],
                                                          input_channel, config.lambda_x);
        auto rows = pl2_compare(population, sampler, suite, config.se_samples,
                                config.se_seed + 17);
        if (std::fabs(rows.front().z_score) <= 3.0) ++within;  // sq_err is first
        per_iteration.push_back(std::move(rows));
    }

    DiagnoseOutput out;
    out.pl_within_3_fraction =
        oracle_run.iterations > 0 ? static_cast<double>(within) / oracle_run.iterations : 0.0;
    out.pl_csv = (fs::path(config.out_dir) / "diagnose_pl.csv").string();
    write_pl_report_csv(per_iteration, out.pl_csv);

    // Parameter-consistency track from the adaptive run.
    std::vector<ParameterErrorRow> param_rows;
    if (config.adaptation != "oracle") {
        RunSetup setup = make_run_setup(config, instance, /*oracle=*/false);
        setup.gamp.record_trajectory = true;
        const GampResult adaptive_run =
            gamp_run(instance, setup.gamp, setup.initial_x, setup.initial_z);
        param_rows = parameter_consistency_report(adaptive_run.trajectory,
                                                  instance.lambda_x_true, instance.lambda_z_true);
    }
    out.parameter_csv = (fs::path(config.out_dir) / "diagnose_parameters.csv").string();
    write_parameter_report_csv(param_rows, out.parameter_csv);

    std::string text = summarize_pl_report(per_iteration);
    if (!param_rows.empty()) {
        const auto& last = param_rows.back();
        text += "final parameter errors: |rho_hat - rho*| = " + std::to_string(last.rho_err) +
                ", sigma_x_sq rel err = " + std::to_string(last.sigma_x_sq_rel_err) +
                ", ||lambda_z_hat - lambda_z*||_inf = " + std::to_string(last.lambda_z_inf_err) +
                "\n";
    }
    out.summary_text = text;

    std::ofstream txt((fs::path(config.out_dir) / "diagnose_summary.txt").string(),
                      std::ios::trunc);
    txt << text;
    return out;
}

}  // namespace agamp
