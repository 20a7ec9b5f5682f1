#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "debias/data.hpp"
#include "debias/dfl.hpp"
#include "debias/mlp.hpp"

namespace debias {

enum class TrainMode { vanilla, dfl_demog, blind, control, jtt };

std::string_view to_string(TrainMode mode);
// Accepts "vanilla", "dfl-demog" (or "demog"), "blind", "control", "jtt".
std::optional<TrainMode> parse_train_mode(std::string_view text);
// Detector used by a DFL-family mode; nullopt for vanilla and jtt.
std::optional<DetectorMode> detector_mode(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::vanilla;
  double gamma = 0.0;
  double temperature = 1.0;
  int epochs = 10;
  std::size_t batch_size = 64;
  double main_lr = 5e-4;
  double detector_lr = 1e-3;
  double weight_decay = 0.01;  // AdamW decay for encoder + main head
  std::size_t hidden_width = 32;
  std::size_t depth = 1;
  std::uint64_t seed = 0;
  int jtt_upweight = 4;  // lambda_up
  int jtt_epoch = 1;     // T
  bool joint_success_only = false;

  void validate() const;
  MlpShape shape_for(const Dataset& train) const;
};

struct Evaluation {
  std::vector<int> predictions;  // argmax, ties to the lower class
  Matrix probabilities;          // softmax of main logits
  double accuracy = 0.0;
};

Evaluation evaluate(const MlpParams& params, const Dataset& ds);

// Detector behaviour on a dataset under the model's own predictions.
struct DetectorEval {
  std::vector<int> targets;          // s per sample
  std::vector<double> target_prob;   // p(s | x), temperature-scaled
  std::vector<double> confidence;    // max class probability
  std::vector<int> correct;          // detector argmax == s
  double accuracy = 0.0;
};

// Empty result for modes without a meaningful detector target
// (control) or when demog targets are unavailable.
DetectorEval evaluate_detector(const MlpParams& params, const Dataset& ds, DetectorMode mode,
                               double temperature);

struct EpochReport {
  int epoch = 0;
  double val_accuracy = 0.0;
  double mean_weight = 1.0;
  double mean_loss = 0.0;
  const MlpParams* params = nullptr;
};

using EpochCallback = std::function<void(const EpochReport&)>;

struct TrainResult {
  MlpParams best;
  int best_epoch = 0;                 // 0-based; argmax of val_accuracy, earliest on ties
  std::vector<double> val_accuracy;   // per epoch
  std::vector<double> mean_weight;    // per epoch, mean DFL weight over all steps' samples
  std::vector<double> mean_loss;      // per epoch, weighted main loss
  DetectorEval detector;              // best model on the validation set
  std::uint64_t steps = 0;
};

// Simultaneous training of the main model and (for DFL modes) the detector
// head. Each batch does one forward pass, derives detector targets from it,
// steps the detector head on its own loss, and steps encoder + main head on
// the DFL-weighted cross-entropy with the weights held constant.
TrainResult train(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                  const EpochCallback& on_epoch = {});

// Same loop over an explicit multiset of training rows (JTT stage 2).
TrainResult train_on_rows(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                          std::span<const std::size_t> rows, const EpochCallback& on_epoch = {});

struct JttResult {
  TrainResult stage2;
  MlpParams stage1_model;                  // parameters after epoch T of stage 1
  std::vector<std::size_t> misclassified;  // train rows wrong under stage1_model
  std::vector<std::size_t> stage2_rows;    // n + (lambda_up - 1) * |misclassified| entries
  bool degenerate = false;                 // nothing misclassified: stage 2 == vanilla
};

JttResult train_jtt(const TrainConfig& cfg, const Dataset& train, const Dataset& val);

}  // namespace debias
