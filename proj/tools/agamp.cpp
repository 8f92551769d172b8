// Command-line front end: instance generation, single GAMP/SE runs, figure
// sweeps and diagnostics reports, all emitting plot-ready CSV.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "agamp/experiments.hpp"
#include "agamp/model.hpp"

namespace {

using namespace agamp;
using nlohmann::json;

struct CommonFlags {
    std::string config_path;
    std::string preset = "single";
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0;
    int workers = 0;
    std::string adaptation;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file (see SCHEMA.md)");
    cmd->add_option("--preset", flags.preset, "experiment preset: fig2a|fig2b|fig3|single|se");
    cmd->add_option("--out-dir", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "base seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--trials", flags.trials, "trial count per sweep point");
    cmd->add_option("--workers", flags.workers, "concurrent trials");
    cmd->add_option("--adaptation", flags.adaptation, "oracle|em|em+ml");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig cfg = flags.config_path.empty() ? preset_config(flags.preset)
                                                     : load_config_file(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed_set) cfg.seed_base = flags.seed;
    if (flags.trials > 0) cfg.trials = flags.trials;
    if (flags.workers > 0) cfg.workers = flags.workers;
    if (!flags.adaptation.empty()) cfg.adaptation = flags.adaptation;
    cfg.validate();
    return cfg;
}

int fail_with_json(const std::string& type, const std::string& message) {
    json err;
    err["error"] = {{"type", type}, {"message", message}};
    std::cerr << err.dump() << "\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive GAMP experiments"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool export_csv = false;

    auto* generate = app.add_subcommand("generate", "generate and store a problem instance");
    add_common(generate, flags);
    generate->add_flag("--csv", export_csv, "also export x_true / y_obs as CSV");

    auto* run = app.add_subcommand("run", "single GAMP run with trajectory output");
    add_common(run, flags);

    auto* se = app.add_subcommand("se", "state-evolution recursion run");
    add_common(se, flags);
    int se_iters = 0;
    int se_samples = 0;
    se->add_option("--iters", se_iters, "SE iterations");
    se->add_option("--samples", se_samples, "Monte Carlo samples per expectation");

    auto* sweep = app.add_subcommand("sweep", "figure-style sweep over the configured grid");
    add_common(sweep, flags);

    auto* diagnose = app.add_subcommand("diagnose", "SE agreement and parameter-error reports");
    add_common(diagnose, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = resolve_config(flags);

        if (generate->parsed()) {
            std::filesystem::create_directories(cfg.out_dir);
            const Eigen::Index m = cfg.m_for_ratio(cfg.mn_ratio);
            const ProblemInstance instance = generate_instance(
                m, cfg.n, cfg.lambda_x, cfg.lambda_z, cfg.seed_base, cfg.workers);
            const std::string path =
                (std::filesystem::path(cfg.out_dir) / "instance.json").string();
            save_instance(instance, path);
            if (export_csv) {
                export_instance_csv(
                    instance,
                    (std::filesystem::path(cfg.out_dir) / "instance.csv").string());
            }
            std::cout << "wrote " << path << " (m=" << m << ", n=" << cfg.n << ")\n";
        } else if (run->parsed()) {
            const SingleRunOutput out = run_single(cfg, cfg.adaptation == "oracle");
            std::cout << "wrote " << out.trajectory_csv << "\n"
                      << "wrote " << out.summary_json << "\n"
                      << "final mse = " << out.result.mse << " (" << to_db(out.result.mse)
                      << " dB) after " << out.result.iterations << " iterations\n";
        } else if (se->parsed()) {
            if (se_iters > 0) cfg.se_iters = se_iters;
            if (se_samples > 0) cfg.se_samples = se_samples;
            const SeRunOutput out = run_se_experiment(cfg);
            std::cout << "wrote " << out.trajectory_csv << "\n"
                      << "wrote " << out.summary_json << "\n"
                      << "fixed-point mse = " << out.result.predicted_mse.back() << " ("
                      << to_db(out.result.predicted_mse.back()) << " dB)\n";
        } else if (sweep->parsed()) {
            const SweepResult out = run_sweep(cfg);
            std::cout << "wrote " << out.csv_path << " (" << out.points.size()
                      << " sweep points)\n";
        } else if (diagnose->parsed()) {
            const DiagnoseOutput out = run_diagnose(cfg);
            std::cout << out.summary_text;
            std::cout << "wrote " << out.pl_csv << "\n" << "wrote " << out.parameter_csv << "\n";
        }
    } catch (const ConfigError& e) {
        return fail_with_json("config", e.what());
    } catch (const IoError& e) {
        return fail_with_json("io", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail_with_json("io", e.what());
    } catch (const DomainError& e) {
        return fail_with_json("domain", e.what());
    } catch (const std::exception& e) {
        return fail_with_json("runtime", e.what());
    }
    return 0;
}
