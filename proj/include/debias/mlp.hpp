#pragma once

// Fixed-topology network used by every training mode:
//
//   g   : ReLU MLP encoder (depth >= 1 hidden layers of equal width)
//   h_M : linear main head over g(x)
//   h_B : linear detector head over g(x)
//
// The main loss back-propagates through h_M and g; the detector loss only
// reaches h_B. That split is enforced by the gradient types: DetectorGradients
// has no encoder block.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "debias/matrix.hpp"

namespace debias {

struct DenseLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : weight(out, in), bias(out, 0.0) {}

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

struct MlpShape {
  std::size_t input_dim = 0;
  std::size_t hidden_width = 32;
  std::size_t depth = 1;
  std::size_t num_classes = 2;
  std::size_t detector_outputs = 2;

  void validate() const;
  bool operator==(const MlpShape&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> encoder;
  DenseLayer main_head;
  DenseLayer detector_head;

  MlpShape shape() const;
  // Throws ConfigError on inconsistent dimensions or non-finite entries.
  void validate() const;

  // Flattened views in a fixed order: encoder layers (weight, bias), then
  // main head (weight, bias).
  std::vector<std::span<double>> main_tensors();
  std::vector<std::span<double>> detector_tensors();

  bool operator==(const MlpParams&) const = default;
};

// He-style uniform fan-in initialization, U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
// zero biases. The encoder/main head and the detector head draw from separate
// seeded streams, so the main parameters do not depend on the detector size.
MlpParams init_params(const MlpShape& shape, std::uint64_t seed);

// All-zero parameters of the given shape.
MlpParams zero_params(const MlpShape& shape);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per encoder layer
  std::vector<Matrix> activations;      // ReLU outputs; back() is g(x)
  Matrix main_logits;
  Matrix detector_logits;

  std::size_t batch_size() const { return input.rows(); }
  const Matrix& representation() const { return activations.back(); }
};

ForwardCache forward(const MlpParams& params, const Matrix& batch);

// g(x) only.
Matrix encode(const MlpParams& params, const Matrix& batch);

struct MainGradients {
  std::vector<DenseLayer> encoder;
  DenseLayer main_head;

  std::vector<std::span<const double>> tensors() const;
};

struct DetectorGradients {
  DenseLayer head;

  std::vector<std::span<const double>> tensors() const;
};

// (1/n) * sum_i w_i * -log softmax(f_M(x_i))[y_i]
double weighted_cross_entropy_loss(const ForwardCache& cache, std::span<const int> labels,
                                   std::span<const double> weights);

// Gradient of the loss above w.r.t. encoder and main head. The weights are
// constants: nothing flows back into the detector.
MainGradients weighted_cross_entropy_backward(const MlpParams& params, const ForwardCache& cache,
                                              std::span<const int> labels,
                                              std::span<const double> weights);

// (1/n) * sum_i -log softmax(f_B(x_i) / t)[s_i]
double detector_loss(const ForwardCache& cache, std::span<const int> targets, double temperature);

// Gradient of detector_loss w.r.t. the detector head only.
DetectorGradients detector_backward(const MlpParams& params, const ForwardCache& cache,
                                    std::span<const int> targets, double temperature);

}  // namespace debias
