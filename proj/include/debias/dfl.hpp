#pragma once

// Debiased focal loss weighting. A bias detector h_B reads the encoder output
// and predicts a per-sample target s; a sample's main-loss weight is
//
//   w_i = (1 - p_i)^gamma,   p_i = softmax(f_B(x_i) / t)[s_i]
//
// so samples the detector gets right with confidence are down-weighted.
// What s is depends on the detector:
//   demog   : the protected attribute z
//   blind   : whether the main model's prediction is correct (1) or not (0)
//   control : a seeded random bit, a null baseline for the blind detector

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "debias/matrix.hpp"

namespace debias {

enum class DetectorMode { demog, blind, control };

std::string_view to_string(DetectorMode mode);

struct DflConfig {
  DetectorMode mode = DetectorMode::blind;
  double gamma = 1.0;
  double temperature = 1.0;
  // Ablation: only down-weight samples where the detector predicts s
  // correctly and the main model is correct; all others keep weight 1.
  bool joint_success_only = false;

  void validate() const;
};

struct TargetInputs {
  DetectorMode mode = DetectorMode::blind;
  std::span<const int> labels;               // y for the batch
  std::span<const int> groups;               // z for the batch; empty when absent
  const Matrix* main_logits = nullptr;       // same forward pass as the step
  std::span<const std::size_t> sample_ids;   // dataset row of each batch entry
  std::uint64_t seed = 0;
  int epoch = 0;
};

// Detector labels for one batch. Throws ConfigError for demog mode without
// groups, or when a required input is missing.
std::vector<int> detector_targets(const TargetInputs& in);

// Seeded random bit used by the control detector; fixed per (sample, epoch).
int control_label(std::uint64_t seed, std::size_t sample_id, int epoch);

// Per-sample weights (1 - p)^gamma. gamma == 0 yields exactly 1.
std::vector<double> dfl_weights(const Matrix& detector_logits, std::span<const int> targets,
                                double gamma, double temperature);

// Ablation variant: the focal weight applies only where the detector's argmax
// equals s and s == 1 (main model correct).
std::vector<double> dfl_weights_joint_success(const Matrix& detector_logits,
                                              std::span<const int> targets, double gamma,
                                              double temperature);

}  // namespace debias
