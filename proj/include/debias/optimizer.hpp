#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace debias {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW) decay; 0 gives plain Adam.
  double weight_decay = 0.0;

  void validate() const;
};

// Moment accumulators for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, const std::vector<std::size_t>& tensor_sizes);

  // One update over all tensors:
  //   theta <- theta * (1 - lr * wd)
  //   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
  // Throws NumericalError (leaving parameters untouched) when any gradient
  // entry is not finite.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

template <typename Spans>
std::vector<std::size_t> tensor_sizes(const Spans& tensors) {
  std::vector<std::size_t> sizes;
  sizes.reserve(tensors.size());
  for (const auto& t : tensors) sizes.push_back(t.size());
  return sizes;
}

}  // namespace debias
