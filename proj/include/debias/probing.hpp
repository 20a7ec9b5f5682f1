#pragma once

// MDL probing of encoder representations (online / prequential code).
//
// The data is shuffled once and cut into blocks at the given fractions. The
// first block is sent with a uniform code, n_1 * log2|Z| bits. Every later
// block i is sent with a linear probe trained from scratch on blocks 1..i-1,
// costing -sum log2 p(z | x) over block i. Compression is the uniform
// codelength of the whole set divided by the online codelength.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "debias/matrix.hpp"
#include "debias/mlp.hpp"

namespace debias {

struct Dataset;

// Multinomial logistic regression head.
struct LinearModel {
  Matrix weight;              // classes x dim
  std::vector<double> bias;   // classes
};

struct LinearTrainOptions {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
};

// Zero-initialised head trained with Adam on mean cross-entropy; the row
// order is reshuffled every epoch.
LinearModel train_linear(const Matrix& x, std::span<const int> targets, int classes,
                         const LinearTrainOptions& options);
Matrix predict_proba(const LinearModel& model, const Matrix& x);

// Encoder output g(x) for every row of ds.
Matrix extract_representations(const MlpParams& params, const Dataset& ds);

struct ProbeOptions {
  // Cumulative block ends in percent; strictly increasing, last = 100.
  std::vector<double> fractions{2.0, 3.0, 4.4, 6.5, 9.5, 14.0, 21.0, 31.0, 45.7, 67.6, 100.0};
  LinearTrainOptions training;
};

struct ProbeReport {
  double codelength_bits = 0.0;
  double uniform_bits = 0.0;   // n * log2|Z|
  double compression = 0.0;    // uniform_bits / codelength_bits
  std::vector<double> fractions;
  std::vector<std::size_t> block_ends;  // cumulative sample counts
  std::vector<double> block_bits;       // codelength per block
};

// Throws ConfigError on a bad fraction schedule, fewer than two groups, a
// length mismatch, or a schedule whose first block is empty.
ProbeReport mdl_probe(const Matrix& representations, std::span<const int> z, int num_groups,
                      const ProbeOptions& options = {});

struct ProbeRow {
  double gamma = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  double compression = 0.0;
};

struct ProbeInput {
  double gamma = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  const MlpParams* params = nullptr;
};

// Probes every model on the same dataset; rows sorted by (gamma, t, seed).
std::vector<ProbeRow> probe_sweep(std::span<const ProbeInput> models, const Dataset& ds,
                                  const ProbeOptions& options = {});

}  // namespace debias
