#include "debias/mlp.hpp"

#include <cmath>
#include <string>

#include "debias/errors.hpp"
#include "debias/kernels.hpp"
#include "debias/random.hpp"
#include "debias/softmax.hpp"

namespace debias {

namespace {

void init_layer(DenseLayer& layer, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(layer.inputs()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : layer.weight.values()) w = dist(rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_layer(const DenseLayer& layer, const std::string& name) {
  if (layer.bias.size() != layer.outputs()) throw ConfigError(name + ": bias/weight mismatch");
  if (!all_finite(layer.weight.values()) || !all_finite(layer.bias)) {
    throw ConfigError(name + ": non-finite parameter");
  }
}

void check_batch(const ForwardCache& cache, std::size_t labels, std::size_t weights) {
  if (labels != cache.batch_size() || weights != cache.batch_size()) {
    throw ConfigError("batch size mismatch between cache, labels and weights");
  }
}

}  // namespace

void MlpShape::validate() const {
  if (input_dim == 0 || hidden_width == 0 || depth == 0) {
    throw ConfigError("network dimensions must be >= 1");
  }
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (detector_outputs < 2) throw ConfigError("detector_outputs must be >= 2");
}

MlpShape MlpParams::shape() const {
  MlpShape s;
  s.input_dim = encoder.empty() ? 0 : encoder.front().inputs();
  s.hidden_width = encoder.empty() ? 0 : encoder.front().outputs();
  s.depth = encoder.size();
  s.num_classes = main_head.outputs();
  s.detector_outputs = detector_head.outputs();
  return s;
}

void MlpParams::validate() const {
  if (encoder.empty()) throw ConfigError("encoder needs at least one layer");
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    check_layer(encoder[l], "encoder." + std::to_string(l));
    if (l > 0 && encoder[l].inputs() != encoder[l - 1].outputs()) {
      throw ConfigError("encoder." + std::to_string(l) + ": input dim mismatch");
    }
  }
  check_layer(main_head, "main_head");
  check_layer(detector_head, "detector_head");
  const std::size_t rep = encoder.back().outputs();
  if (main_head.inputs() != rep || detector_head.inputs() != rep) {
    throw ConfigError("head input dims must match the encoder output");
  }
  shape().validate();
}

std::vector<std::span<double>> MlpParams::main_tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : encoder) {
    out.push_back(layer.weight.values());
    out.push_back(layer.bias);
  }
  out.push_back(main_head.weight.values());
  out.push_back(main_head.bias);
  return out;
}

std::vector<std::span<double>> MlpParams::detector_tensors() {
  return {detector_head.weight.values(), detector_head.bias};
}

std::vector<std::span<const double>> MainGradients::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& layer : encoder) {
    out.push_back(layer.weight.values());
    out.push_back(layer.bias);
  }
  out.push_back(main_head.weight.values());
  out.push_back(main_head.bias);
  return out;
}

std::vector<std::span<const double>> DetectorGradients::tensors() const {
  return {head.weight.values(), head.bias};
}

MlpParams zero_params(const MlpShape& shape) {
  shape.validate();
  MlpParams p;
  std::size_t in = shape.input_dim;
  for (std::size_t l = 0; l < shape.depth; ++l) {
    p.encoder.emplace_back(in, shape.hidden_width);
    in = shape.hidden_width;
  }
  p.main_head = DenseLayer(in, shape.num_classes);
  p.detector_head = DenseLayer(in, shape.detector_outputs);
  return p;
}

MlpParams init_params(const MlpShape& shape, std::uint64_t seed) {
  MlpParams p = zero_params(shape);
  Rng main_rng(derive_seed(seed, stream::kEncoderInit));
  for (auto& layer : p.encoder) init_layer(layer, main_rng);
  init_layer(p.main_head, main_rng);
  Rng detector_rng(derive_seed(seed, stream::kDetectorInit));
  init_layer(p.detector_head, detector_rng);
  return p;
}

ForwardCache forward(const MlpParams& params, const Matrix& batch) {
  if (params.encoder.empty()) throw ConfigError("forward: empty encoder");
  if (batch.cols() != params.encoder.front().inputs()) {
    throw ConfigError("forward: batch feature dim " + std::to_string(batch.cols()) +
                      " does not match encoder input dim " +
                      std::to_string(params.encoder.front().inputs()));
  }
  ForwardCache cache;
  cache.input = batch;
  const Matrix* current = &cache.input;
  cache.pre_activations.resize(params.encoder.size());
  cache.activations.resize(params.encoder.size());
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    kernels::affine(*current, params.encoder[l].weight, params.encoder[l].bias,
                    cache.pre_activations[l]);
    Matrix& act = cache.activations[l];
    act = cache.pre_activations[l];
    for (double& v : act.values()) v = v > 0.0 ? v : 0.0;
    current = &act;
  }
  kernels::affine(*current, params.main_head.weight, params.main_head.bias, cache.main_logits);
  kernels::affine(*current, params.detector_head.weight, params.detector_head.bias,
                  cache.detector_logits);
  return cache;
}

Matrix encode(const MlpParams& params, const Matrix& batch) {
  return forward(params, batch).activations.back();
}

double weighted_cross_entropy_loss(const ForwardCache& cache, std::span<const int> labels,
                                   std::span<const double> weights) {
  check_batch(cache, labels.size(), weights.size());
  const std::size_t n = cache.batch_size();
  if (n == 0) return 0.0;
  const Matrix probs = softmax_rows(cache.main_logits);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += weights[i] * clamped_nll(probs(i, static_cast<std::size_t>(labels[i])));
  }
  return total / static_cast<double>(n);
}

MainGradients weighted_cross_entropy_backward(const MlpParams& params, const ForwardCache& cache,
                                              std::span<const int> labels,
                                              std::span<const double> weights) {
  check_batch(cache, labels.size(), weights.size());
  const std::size_t n = cache.batch_size();
  const std::size_t classes = params.main_head.outputs();
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);

  // d loss / d logits = w_i * (softmax - onehot) / n
  Matrix delta = softmax_rows(cache.main_logits);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= classes) throw ConfigError("label out of range");
    auto row = delta.row(i);
    row[y] -= 1.0;
    const double scale = weights[i] * inv_n;
    for (double& v : row) v *= scale;
  }

  MainGradients grads;
  grads.main_head = DenseLayer(params.main_head.inputs(), classes);
  kernels::weight_grad(delta, cache.representation(), grads.main_head.weight,
                       grads.main_head.bias);

  grads.encoder.resize(params.encoder.size());
  Matrix upstream;
  kernels::input_grad(delta, params.main_head.weight, upstream);
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    const Matrix& pre = cache.pre_activations[l];
    for (std::size_t j = 0; j < upstream.size(); ++j) {
      if (!(pre.values()[j] > 0.0)) upstream.values()[j] = 0.0;
    }
    const Matrix& layer_input = l == 0 ? cache.input : cache.activations[l - 1];
    DenseLayer& g = grads.encoder[l];
    g = DenseLayer(params.encoder[l].inputs(), params.encoder[l].outputs());
    kernels::weight_grad(upstream, layer_input, g.weight, g.bias);
    if (l > 0) {
      Matrix next;
      kernels::input_grad(upstream, params.encoder[l].weight, next);
      upstream = std::move(next);
    }
  }
  return grads;
}

double detector_loss(const ForwardCache& cache, std::span<const int> targets, double temperature) {
  if (targets.size() != cache.batch_size()) throw ConfigError("detector target size mismatch");
  const std::size_t n = cache.batch_size();
  if (n == 0) return 0.0;
  const Matrix probs = softmax_rows(cache.detector_logits, temperature);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += clamped_nll(probs(i, static_cast<std::size_t>(targets[i])));
  }
  return total / static_cast<double>(n);
}

DetectorGradients detector_backward(const MlpParams& params, const ForwardCache& cache,
                                    std::span<const int> targets, double temperature) {
  if (targets.size() != cache.batch_size()) throw ConfigError("detector target size mismatch");
  const std::size_t n = cache.batch_size();
  const std::size_t outs = params.detector_head.outputs();
  const double scale = n == 0 ? 0.0 : 1.0 / (static_cast<double>(n) * temperature);

  // d loss / d logits = (softmax(logits / t) - onehot) / (n t)
  Matrix delta = softmax_rows(cache.detector_logits, temperature);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(targets[i]);
    if (targets[i] < 0 || s >= outs) throw ConfigError("detector target out of range");
    auto row = delta.row(i);
    row[s] -= 1.0;
    for (double& v : row) v *= scale;
  }
  DetectorGradients grads;
  grads.head = DenseLayer(params.detector_head.inputs(), outs);
  kernels::weight_grad(delta, cache.representation(), grads.head.weight, grads.head.bias);
  return grads;
}

}  // namespace debias
