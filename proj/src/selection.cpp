#include "debias/selection.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "debias/errors.hpp"

namespace debias {

double dto_distance(double max_accuracy, double accuracy, double fairness) {
  const double da = max_accuracy - accuracy;
  return std::sqrt(da * da + fairness * fairness);
}

const CandidateRun& dto_select(std::span<const CandidateRun> candidates, double max_accuracy) {
  if (candidates.empty()) throw ConfigError("dto_select: no candidates");
  const CandidateRun* best = &candidates.front();
  double best_d = dto_distance(max_accuracy, best->accuracy, best->fairness);
  for (const CandidateRun& c : candidates.subspan(1)) {
    const double d = dto_distance(max_accuracy, c.accuracy, c.fairness);
    bool better = d < best_d;
    if (d == best_d) {
      if (c.accuracy != best->accuracy) {
        better = c.accuracy > best->accuracy;
      } else if (c.gamma != best->gamma) {
        better = c.gamma < best->gamma;
      } else {
        better = c.temperature < best->temperature;
      }
    }
    if (better) {
      best = &c;
      best_d = d;
    }
  }
  return *best;
}

BlindSelection blind_select(std::span<const AccuracyCandidate> candidates,
                            double threshold_fraction) {
  if (candidates.empty()) throw ConfigError("blind_select: no candidates");
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw ConfigError("blind_select: threshold fraction must be in (0, 1]");
  }
  double max_acc = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) max_acc = std::max(max_acc, c.accuracy);

  BlindSelection out;
  out.cutoff = threshold_fraction * max_acc;
  const AccuracyCandidate* pick = nullptr;
  for (const auto& c : candidates) {
    if (c.accuracy < out.cutoff) continue;
    if (!pick || c.gamma > pick->gamma ||
        (c.gamma == pick->gamma && c.temperature < pick->temperature)) {
      pick = &c;
    }
  }
  if (!pick) {
    // Only reachable with non-finite accuracies; keep the documented fallback.
    out.fallback = true;
    for (const auto& c : candidates) {
      if (!pick || c.accuracy > pick->accuracy) pick = &c;
    }
    std::cerr << "warning: blind_select found no candidate above the cutoff; "
                 "using the max-accuracy candidate\n";
  }
  out.gamma = pick->gamma;
  out.temperature = pick->temperature;
  out.accuracy = pick->accuracy;
  return out;
}

std::vector<double> normalized_fairness(
    const std::vector<std::vector<std::optional<double>>>& rows) {
  std::size_t metrics = 0;
  for (const auto& r : rows) metrics = std::max(metrics, r.size());
  std::vector<double> max_value(metrics, 0.0);
  for (const auto& r : rows) {
    for (std::size_t m = 0; m < r.size(); ++m) {
      if (r[m]) max_value[m] = std::max(max_value[m], *r[m]);
    }
  }
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t m = 0; m < r.size(); ++m) {
      if (!r[m]) continue;
      sum += max_value[m] > 0.0 ? *r[m] / max_value[m] : 0.0;
      ++used;
    }
    out.push_back(used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace debias
