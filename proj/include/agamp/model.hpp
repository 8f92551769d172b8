#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "agamp/types.hpp"

namespace agamp {

// m x n matrix with i.i.d. N(0, 1/m) entries. Row i is filled from the
// Philox substream (seed, kStreamMatrix, i), so the result is independent of
// the worker count.
RowMatrixXd generate_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed, int workers = 1);

// Gauss-Bernoulli vector: component j is zero with probability 1-rho, else
// N(0, sigma_x_sq). Substream (seed, kStreamSignal, j).
VectorXd generate_gauss_bernoulli(Eigen::Index n, const InputParams& params, std::uint64_t seed);

// Pushes z through the output channel. AWGN: w ~ N(0, sigma_sq), y = z + w.
// Poisson-LNP: y_i ~ Poisson(f(z_i)); component i draws from substream
// (seed, kStreamChannel, i), and w_i records the first uniform variate that
// substream produced (for rates below the PTRS threshold the draw is pure CDF
// inversion, so y_i is a deterministic function of (z_i, w_i)).
std::pair<VectorXd, VectorXd> apply_output_channel(const VectorXd& z, const OutputParams& params,
                                                   std::uint64_t seed);

ProblemInstance generate_instance(Eigen::Index m, Eigen::Index n, const InputParams& input,
                                  const OutputParams& output, std::uint64_t seed, int workers = 1);

// --- persistence -----------------------------------------------------------

// Writes a single JSON document with dims, seed and parameters. Vectors go
// inline when the total element count is at most `inline_threshold`,
// otherwise into a raw little-endian float64 sidecar next to the JSON file.
void save_instance(const ProblemInstance& instance, const std::string& json_path,
                   Eigen::Index inline_threshold = 10000);

ProblemInstance load_instance(const std::string& json_path);

// Long-format CSV (kind,index,value) of x_true and y_obs for external tools.
void export_instance_csv(const ProblemInstance& instance, const std::string& csv_path);

}  // namespace agamp
