#pragma once

// End-to-end runs: data preparation, training, evaluation, and (gamma, t) x
// seed sweeps with both selection rules.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "debias/data.hpp"
#include "debias/fairness.hpp"
#include "debias/probing.hpp"
#include "debias/selection.hpp"
#include "debias/trainer.hpp"

namespace debias {

struct DataSource {
  enum class Kind { synthetic, file };
  Kind kind = Kind::synthetic;
  SyntheticSpec synthetic;
  std::filesystem::path path;
  TabularSchema schema;
};

struct SweepSpec {
  std::vector<double> gammas{1, 2, 4, 8, 16};
  std::vector<double> temperatures{1, 2, 4, 8};
  std::vector<std::uint64_t> seeds{0, 5, 26, 42, 63};
  int workers = 1;
  double threshold = 0.95;
  std::vector<std::string> dto_metrics{"tpr_rms", "independence", "separation", "sufficiency"};
};

struct ExperimentConfig {
  std::string name = "run";
  DataSource data;
  SplitSpec split;            // split.seed follows train.seed unless set
  bool split_seed_set = false;
  TrainConfig train;
  double smoothing = 0.5;
  SweepSpec sweep;
  ProbeOptions probe;
};

Dataset load_source(const DataSource& source);

// Splits `full` with the experiment's split spec; the split seed is the run
// seed unless the config fixes it.
DataSplits prepare_data(const ExperimentConfig& cfg, const Dataset& full);

struct RunOutcome {
  TrainResult training;
  Evaluation test_eval;
  EvalLog test_log;
  FairnessReport test_report;
  FairnessReport val_report;  // for DTO selection
  std::vector<double> train_share;
};

RunOutcome run_experiment(const ExperimentConfig& cfg, const DataSplits& splits);

struct SweepRow {
  double gamma = 0.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double val_accuracy = 0.0;  // best-epoch validation accuracy
  FairnessReport val_report;
  FairnessReport test_report;
};

struct SweepCell {
  double gamma = 0.0;
  double temperature = 1.0;
  std::size_t runs = 0;  // successful seeds
  double val_accuracy = 0.0;
  double val_fairness = 0.0;  // normalized, for DTO
  std::vector<std::pair<std::string, std::optional<double>>> test_means;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // grid order: gamma, then t, then seed
  std::vector<SweepCell> cells;
  std::optional<BlindSelection> blind;
  std::optional<SweepCell> dto;
};

// Runs every (gamma, t, seed) cell, up to sweep.workers at a time. A cell
// that throws is recorded with ok = false and the sweep continues.
SweepResult run_sweep(const ExperimentConfig& cfg, const Dataset& full);

// Means over successful seeds per (gamma, t), with both selections.
SweepResult summarize_sweep(std::vector<SweepRow> rows, const SweepSpec& spec);

std::string sweep_csv(const SweepResult& result);
std::string heatmap_csv(const SweepResult& result);
std::string selection_text(const SweepResult& result);

}  // namespace debias
