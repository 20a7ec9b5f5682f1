#pragma once

// Hyperparameter selection over a (gamma, t) grid.
//
//   dto_select   : argmin of sqrt((max_accuracy - acc)^2 + fairness^2), the
//                  distance to the utopia point (max accuracy, zero bias).
//                  Needs fairness metrics, so it needs demographics.
//   blind_select : highest gamma, then lowest t, among candidates whose
//                  accuracy reaches threshold_fraction * max accuracy.
//                  Sees accuracies only.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace debias {

struct CandidateRun {
  double gamma = 0.0;
  double temperature = 1.0;
  double accuracy = 0.0;
  double fairness = 0.0;  // aggregated unfairness, lower is better
  std::vector<std::uint64_t> seeds;
};

double dto_distance(double max_accuracy, double accuracy, double fairness);

// Ties: higher accuracy, then lower gamma, then lower t. Throws ConfigError
// when `candidates` is empty.
const CandidateRun& dto_select(std::span<const CandidateRun> candidates, double max_accuracy);

struct AccuracyCandidate {
  double gamma = 0.0;
  double temperature = 1.0;
  double accuracy = 0.0;
};

struct BlindSelection {
  double gamma = 0.0;
  double temperature = 1.0;
  double accuracy = 0.0;
  double cutoff = 0.0;    // threshold_fraction * max accuracy
  bool fallback = false;  // nothing reached the cutoff; max-accuracy candidate returned
};

// Throws ConfigError when `candidates` is empty or the fraction is outside
// (0, 1]. Prints a warning to stderr on fallback.
BlindSelection blind_select(std::span<const AccuracyCandidate> candidates,
                            double threshold_fraction = 0.95);

// Per-candidate mean of metric values divided by that metric's maximum over
// all candidates (a metric whose maximum is 0 contributes 0). rows[c][m] is
// metric m of candidate c; undefined entries are skipped in that candidate's
// mean. Candidates with no defined metric get NaN.
std::vector<double> normalized_fairness(
    const std::vector<std::vector<std::optional<double>>>& rows);

}  // namespace debias
