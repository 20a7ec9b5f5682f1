#include "debias/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "debias/errors.hpp"

namespace debias {

namespace {

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw ConfigError("softmax temperature must be positive and finite");
  }
}

void softmax_into(std::span<const double> logits, double t, std::span<double> out) {
  double peak = -INFINITY;
  for (double v : logits) peak = std::max(peak, v / t);
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] / t - peak);
    total += out[k];
  }
  for (double& v : out) v /= total;
}

}  // namespace

std::vector<double> softmax_with_temperature(std::span<const double> logits, double t) {
  check_temperature(t);
  std::vector<double> out(logits.size());
  if (!logits.empty()) softmax_into(logits, t, out);
  return out;
}

Matrix softmax_rows(const Matrix& logits, double t) {
  check_temperature(t);
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax_into(logits.row(i), t, out.row(i));
  return out;
}

double clamped_nll(double p) {
  return -std::log(std::clamp(p, kProbClamp, 1.0 - kProbClamp));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

}  // namespace debias
