#pragma once

// Group-fairness metrics over an evaluation log (gold y, prediction r,
// protected attribute z):
//
//   gap metrics        GAP_{M,y} = |M_y(z=0) - M_y(z=1)| for M in {TPR, FPR, precision},
//                      summed over classes, plus TPR_RMS = sqrt(mean_y GAP_{TPR,y}^2)
//   gap correlation    Pearson r between per-class gaps and per-class group share in train
//   independence       sum_z     KL(P(r)   || P(r|z))
//   separation         sum_{y,z} KL(P(r|y) || P(r|y,z))
//   sufficiency        sum_{r,z} KL(P(y|r) || P(y|r,z))
//
// KL terms are in nats over count tables with additive smoothing alpha per
// cell. Undefined quantities are std::nullopt, never zero.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debias/matrix.hpp"

namespace debias {

struct Dataset;
struct Evaluation;

struct EvalLog {
  std::vector<int> labels;       // y
  std::vector<int> predictions;  // r
  std::vector<int> groups;       // z
  Matrix probabilities;          // optional: n x num_classes
  int num_classes = 2;
  int num_groups = 2;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

EvalLog make_eval_log(const Dataset& ds, const Evaluation& ev);

struct ClassGaps {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> precision;
};

struct GapMetrics {
  std::vector<ClassGaps> per_class;
  double tpr_sum = 0.0;
  double tpr_rms = 0.0;
  double fpr_sum = 0.0;
  double precision_sum = 0.0;
  // Classes with a defined gap (coverage).
  std::size_t tpr_defined = 0;
  std::size_t fpr_defined = 0;
  std::size_t precision_defined = 0;

  std::vector<std::optional<double>> tpr_gaps() const;
  std::vector<std::optional<double>> fpr_gaps() const;
  std::vector<std::optional<double>> precision_gaps() const;
};

// Requires a binary protected attribute.
GapMetrics gap_metrics(const EvalLog& log);

// Pearson correlation; nullopt when either series has zero variance or
// fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Pearson over classes whose gap is defined and whose share is finite.
// Needs at least three such classes.
std::optional<double> gap_correlation(std::span<const std::optional<double>> gaps,
                                      std::span<const double> train_share);

struct KlMetric {
  double value = 0.0;
  std::size_t terms = 0;    // KL terms summed
  std::size_t skipped = 0;  // terms dropped because the conditioning event was empty
};

// Natural-log KL(p || q). Infinite when q has a zero where p does not.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// (counts + alpha) / (total + alpha * K)
std::vector<double> smoothed_distribution(std::span<const std::size_t> counts, double alpha);

KlMetric independence(const EvalLog& log, double alpha = 0.5);
KlMetric separation(const EvalLog& log, double alpha = 0.5);
KlMetric sufficiency(const EvalLog& log, double alpha = 0.5);

// Expected calibration error with equal-width confidence bins on [0, 1].
// `correct` holds 0/1 per sample.
double ece(std::span<const double> confidence, std::span<const int> correct, int bins = 10);

struct FairnessReport {
  static constexpr int kSchemaVersion = 1;

  std::size_t samples = 0;
  double accuracy = 0.0;
  GapMetrics gaps;
  std::optional<double> tpr_p;
  std::optional<double> fpr_p;
  std::optional<double> precision_p;
  KlMetric independence;
  KlMetric separation;
  KlMetric sufficiency;
  double smoothing = 0.5;

  // Scalar metrics in a fixed order; undefined values are nullopt.
  std::vector<std::pair<std::string, std::optional<double>>> scalars() const;
  std::optional<double> metric(std::string_view name) const;
};

// Names accepted by FairnessReport::metric.
const std::vector<std::string>& fairness_metric_names();

// `train_share` is the per-class share of group 1 in the training set; pass
// an empty span to skip the gap correlations.
FairnessReport fairness_report(const EvalLog& log, std::span<const double> train_share,
                               double alpha = 0.5);

// key=value lines, one per metric, preceded by a schema line. Undefined
// values print as "undefined".
std::string to_key_value(const FairnessReport& report);

}  // namespace debias
