#include "debias/optimizer.hpp"

#include <cmath>
#include <string>

#include "debias/errors.hpp"

namespace debias {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

AdamState::AdamState(AdamConfig config, const std::vector<std::size_t>& tensor_sizes)
    : config_(config) {
  config_.validate();
  for (std::size_t size : tensor_sizes) {
    m_.emplace_back(size, 0.0);
    v_.emplace_back(size, 0.0);
  }
}

void AdamState::step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ConfigError("optimizer: tensor count mismatch");
  }
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (params[t].size() != m_[t].size() || grads[t].size() != m_[t].size()) {
      throw ConfigError("optimizer: tensor " + std::to_string(t) + " size mismatch");
    }
    for (double g : grads[t]) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in tensor " + std::to_string(t) +
                             " at optimizer step " + std::to_string(steps_ + 1));
      }
    }
  }

  ++steps_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double decay_rate = lr * config_.weight_decay;

  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = m_[t];
    auto& v = v_[t];
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (decay_rate != 0.0) p[j] -= decay_rate * p[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace debias
