#include "agamp/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "agamp/channels.hpp"
#include "agamp/parallel.hpp"
#include "agamp/rng.hpp"

namespace agamp {

RowMatrixXd generate_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed, int workers) {
    if (m < 1 || n < 1) throw DomainError("generate_matrix: dimensions must be >= 1");
    RowMatrixXd a(m, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    parallel_for(m, workers, [&](std::int64_t i) {
        CounterRng rng(seed, kStreamMatrix, static_cast<std::uint64_t>(i));
        double* row = a.row(i).data();
        for (Eigen::Index j = 0; j < n; ++j) row[j] = scale * rng.next_normal();
    });
    return a;
}

VectorXd generate_gauss_bernoulli(Eigen::Index n, const InputParams& params, std::uint64_t seed) {
    params.validate();
    if (n < 1) throw DomainError("generate_gauss_bernoulli: n must be >= 1");
    VectorXd x(n);
    const double sigma_x = std::sqrt(params.sigma_x_sq);
    for (Eigen::Index j = 0; j < n; ++j) {
        CounterRng rng(seed, kStreamSignal, static_cast<std::uint64_t>(j));
        const double u = rng.next_double();
        x[j] = (u < params.rho) ? sigma_x * rng.next_normal() : 0.0;
    }
    return x;
}

std::pair<VectorXd, VectorXd> apply_output_channel(const VectorXd& z, const OutputParams& params,
                                                   std::uint64_t seed) {
    validate(params);
    const Eigen::Index m = z.size();
    VectorXd y(m), w(m);

    if (const auto* awgn = std::get_if<AwgnParams>(&params)) {
        const double sigma = std::sqrt(awgn->sigma_sq);
        for (Eigen::Index i = 0; i < m; ++i) {
            CounterRng rng(seed, kStreamChannel, static_cast<std::uint64_t>(i));
            w[i] = sigma * rng.next_normal();
            y[i] = z[i] + w[i];
        }
        return {y, w};
    }

    const auto& lnp = std::get<PoissonLnpParams>(params);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double rate = lnp_rate(z[i], lnp.lambda_z);
        if (!std::isfinite(rate)) {
            throw ChannelOverflowError(
                "apply_output_channel: non-finite poisson rate at index " + std::to_string(i),
                static_cast<long>(i));
        }
        CounterRng rng(seed, kStreamChannel, static_cast<std::uint64_t>(i));
        const double u = rng.next_double();
        w[i] = u;
        y[i] = (rate < CounterRng::kPoissonPtrsThreshold)
                   ? static_cast<double>(poisson_inverse_cdf(rate, u))
                   : static_cast<double>(poisson_ptrs(rate, rng, u));
    }
    return {y, w};
}

ProblemInstance generate_instance(Eigen::Index m, Eigen::Index n, const InputParams& input,
                                  const OutputParams& output, std::uint64_t seed, int workers) {
    ProblemInstance inst;
    inst.a_matrix = generate_matrix(m, n, seed, workers);
    inst.x_true = generate_gauss_bernoulli(n, input, seed);
    inst.z_true = inst.a_matrix * inst.x_true;
    auto [y, w] = apply_output_channel(inst.z_true, output, seed);
    inst.y_obs = std::move(y);
    inst.w_noise = std::move(w);
    inst.lambda_x_true = input;
    inst.lambda_z_true = output;
    inst.seed = static_cast<std::int64_t>(seed);
    return inst;
}

// --- persistence -----------------------------------------------------------

namespace {

using nlohmann::json;

json params_to_json(const OutputParams& params) {
    if (const auto* awgn = std::get_if<AwgnParams>(&params)) {
        return json{{"kind", "awgn"}, {"sigma_sq", awgn->sigma_sq}};
    }
    const auto& lnp = std::get<PoissonLnpParams>(params);
    return json{{"kind", "poisson_lnp"},
                {"lambda_z", std::vector<double>(lnp.lambda_z.begin(), lnp.lambda_z.end())}};
}

OutputParams params_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "awgn") return AwgnParams{j.at("sigma_sq").get<double>()};
    if (kind == "poisson_lnp") {
        const auto coeffs = j.at("lambda_z").get<std::vector<double>>();
        PoissonLnpParams lnp;
        lnp.lambda_z = Eigen::Map<const VectorXd>(coeffs.data(), coeffs.size());
        return lnp;
    }
    throw IoError("unknown output channel kind '" + kind + "'");
}

void append_span(std::ofstream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

std::vector<double> to_vec(const VectorXd& v) { return {v.begin(), v.end()}; }

}  // namespace

void save_instance(const ProblemInstance& instance, const std::string& json_path,
                   Eigen::Index inline_threshold) {
    json doc;
    doc["schema_version"] = 1;
    doc["m"] = instance.m();
    doc["n"] = instance.n();
    doc["seed"] = instance.seed;
    doc["input_params"] = {{"rho", instance.lambda_x_true.rho},
                           {"sigma_x_sq", instance.lambda_x_true.sigma_x_sq}};
    doc["output_params"] = params_to_json(instance.lambda_z_true);

    const Eigen::Index total =
        instance.a_matrix.size() + instance.x_true.size() + instance.z_true.size() +
        instance.w_noise.size() + instance.y_obs.size();

    if (total <= inline_threshold) {
        doc["storage"] = "inline";
        doc["a_matrix"] = std::vector<double>(instance.a_matrix.data(),
                                              instance.a_matrix.data() + instance.a_matrix.size());
        doc["x_true"] = to_vec(instance.x_true);
        doc["z_true"] = to_vec(instance.z_true);
        doc["w_noise"] = to_vec(instance.w_noise);
        doc["y_obs"] = to_vec(instance.y_obs);
    } else {
        // Raw little-endian float64 sidecar: A row-major, then x, z, w, y.
        const std::string sidecar = json_path + ".bin";
        std::ofstream bin(sidecar, std::ios::binary | std::ios::trunc);
        if (!bin) throw IoError("save_instance: cannot open sidecar " + sidecar);
        append_span(bin, instance.a_matrix.data(), static_cast<std::size_t>(instance.a_matrix.size()));
        append_span(bin, instance.x_true.data(), static_cast<std::size_t>(instance.x_true.size()));
        append_span(bin, instance.z_true.data(), static_cast<std::size_t>(instance.z_true.size()));
        append_span(bin, instance.w_noise.data(), static_cast<std::size_t>(instance.w_noise.size()));
        append_span(bin, instance.y_obs.data(), static_cast<std::size_t>(instance.y_obs.size()));
        if (!bin) throw IoError("save_instance: sidecar write failed");
        doc["storage"] = "sidecar";
        doc["sidecar"] = sidecar;
    }

    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw IoError("save_instance: cannot open " + json_path);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("save_instance: write failed");
}

ProblemInstance load_instance(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("load_instance: cannot open " + json_path);
    json doc;
    in >> doc;

    ProblemInstance inst;
    const auto m = doc.at("m").get<Eigen::Index>();
    const auto n = doc.at("n").get<Eigen::Index>();
    inst.seed = doc.at("seed").get<std::int64_t>();
    inst.lambda_x_true = {doc.at("input_params").at("rho").get<double>(),
                          doc.at("input_params").at("sigma_x_sq").get<double>()};
    inst.lambda_z_true = params_from_json(doc.at("output_params"));

    inst.a_matrix.resize(m, n);
    inst.x_true.resize(n);
    inst.z_true.resize(m);
    inst.w_noise.resize(m);
    inst.y_obs.resize(m);

    const std::string storage = doc.at("storage").get<std::string>();
    if (storage == "inline") {
        auto fill = [](const json& arr, double* dst) {
            std::size_t i = 0;
            for (const auto& v : arr) dst[i++] = v.get<double>();
        };
        fill(doc.at("a_matrix"), inst.a_matrix.data());
        fill(doc.at("x_true"), inst.x_true.data());
        fill(doc.at("z_true"), inst.z_true.data());
        fill(doc.at("w_noise"), inst.w_noise.data());
        fill(doc.at("y_obs"), inst.y_obs.data());
    } else if (storage == "sidecar") {
        const std::string sidecar = doc.at("sidecar").get<std::string>();
        std::ifstream bin(sidecar, std::ios::binary);
        if (!bin) throw IoError("load_instance: cannot open sidecar " + sidecar);
        auto read_span = [&](double* dst, std::size_t count) {
            bin.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * sizeof(double)));
            if (!bin) throw IoError("load_instance: sidecar truncated: " + sidecar);
        };
        read_span(inst.a_matrix.data(), static_cast<std::size_t>(inst.a_matrix.size()));
        read_span(inst.x_true.data(), static_cast<std::size_t>(inst.x_true.size()));
        read_span(inst.z_true.data(), static_cast<std::size_t>(inst.z_true.size()));
        read_span(inst.w_noise.data(), static_cast<std::size_t>(inst.w_noise.size()));
        read_span(inst.y_obs.data(), static_cast<std::size_t>(inst.y_obs.size()));
    } else {
        throw IoError("load_instance: unknown storage mode '" + storage + "'");
    }
    return inst;
}

void export_instance_csv(const ProblemInstance& instance, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw IoError("export_instance_csv: cannot open " + csv_path);
    out << "kind,index,value\n";
    char buf[64];
    auto emit = [&](const char* kind, const VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
            out << kind << ',' << i << ',' << buf << '\n';
        }
    };
    emit("x_true", instance.x_true);
    emit("y_obs", instance.y_obs);
    if (!out) throw IoError("export_instance_csv: write failed");
}

}  // namespace agamp
