#pragma once

// Which samples each detector penalizes. A detector penalizes a sample when
// it gives the sample's correct detector label a probability above 0.5. The
// table splits the population by main-model success and reports, per split,
// the share penalized by
//   success : the success (BLIND) detector
//   demog   : the demographics detector but not the success detector
//   both    : both detectors

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "debias/mlp.hpp"
#include "debias/probing.hpp"

namespace debias {

struct Dataset;

struct PenalizationRow {
  std::size_t population = 0;
  std::array<std::size_t, 3> penalized{};      // success, demog-only, both
  std::array<std::optional<double>, 3> percent;  // nullopt for an empty population
};

struct PenalizationTable {
  PenalizationRow main_correct;
  PenalizationRow main_wrong;
};

// `success_probs[i]` and `demog_probs[i]` are each detector's probability
// of the sample's true detector label.
PenalizationTable penalization_table(std::span<const double> success_probs,
                                     std::span<const double> demog_probs,
                                     std::span<const int> main_correct);

// Delimited text: header, then one row per population.
std::string to_csv(const PenalizationTable& table);

// Linear demographics detector fit on frozen encoder outputs.
LinearModel train_posthoc_detector(const MlpParams& params, const Dataset& ds,
                                   const LinearTrainOptions& options = {});

// Probability each sample's own z receives under the post-hoc detector.
std::vector<double> posthoc_target_probs(const LinearModel& detector, const MlpParams& params,
                                         const Dataset& ds);

}  // namespace debias
