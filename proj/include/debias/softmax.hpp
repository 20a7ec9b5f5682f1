#pragma once

#include <span>
#include <vector>

#include "debias/matrix.hpp"

namespace debias {

// Probability floor/ceiling applied before taking logs.
inline constexpr double kProbClamp = 1e-12;

// softmax(logits / t) computed with the max-shift (log-sum-exp) trick.
// Throws ConfigError when t <= 0 or t is not finite.
std::vector<double> softmax_with_temperature(std::span<const double> logits, double t);

// Row-wise version over a logits matrix.
Matrix softmax_rows(const Matrix& logits, double t = 1.0);

// -log(clamp(p)) for a single probability.
double clamped_nll(double p);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace debias
