#include "debias/dfl.hpp"

#include <cmath>

#include "debias/errors.hpp"
#include "debias/random.hpp"
#include "debias/softmax.hpp"

namespace debias {

std::string_view to_string(DetectorMode mode) {
  switch (mode) {
    case DetectorMode::demog: return "demog";
    case DetectorMode::blind: return "blind";
    case DetectorMode::control: return "control";
  }
  return "unknown";
}

void DflConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be > 0");
  }
}

int control_label(std::uint64_t seed, std::size_t sample_id, int epoch) {
  const std::uint64_t h =
      derive_seed(derive_seed(seed, stream::kControlLabels, static_cast<std::uint64_t>(epoch)),
                  0, sample_id);
  return static_cast<int>(h >> 63);
}

std::vector<int> detector_targets(const TargetInputs& in) {
  const std::size_t n = in.labels.size();
  std::vector<int> s(n);
  switch (in.mode) {
    case DetectorMode::demog:
      if (in.groups.empty() && n > 0) {
        throw ConfigError("demog detector needs the protected attribute z");
      }
      if (in.groups.size() != n) throw ConfigError("group/label size mismatch");
      s.assign(in.groups.begin(), in.groups.end());
      break;
    case DetectorMode::blind:
      if (in.main_logits == nullptr || in.main_logits->rows() != n) {
        throw ConfigError("blind detector needs main logits for the batch");
      }
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<int>(argmax(in.main_logits->row(i))) == in.labels[i] ? 1 : 0;
      }
      break;
    case DetectorMode::control:
      if (in.sample_ids.size() != n) throw ConfigError("control detector needs sample ids");
      for (std::size_t i = 0; i < n; ++i) s[i] = control_label(in.seed, in.sample_ids[i], in.epoch);
      break;
  }
  return s;
}

namespace {

double focal_weight(double p, double gamma) { return std::pow(1.0 - p, gamma); }

void check_targets(const Matrix& logits, std::span<const int> targets) {
  if (logits.rows() != targets.size()) throw ConfigError("detector logits/targets size mismatch");
  for (int s : targets) {
    if (s < 0 || static_cast<std::size_t>(s) >= logits.cols()) {
      throw ConfigError("detector target out of range");
    }
  }
}

}  // namespace

std::vector<double> dfl_weights(const Matrix& detector_logits, std::span<const int> targets,
                                double gamma, double temperature) {
  check_targets(detector_logits, targets);
  const Matrix probs = softmax_rows(detector_logits, temperature);
  std::vector<double> w(targets.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = focal_weight(probs(i, static_cast<std::size_t>(targets[i])), gamma);
  }
  return w;
}

std::vector<double> dfl_weights_joint_success(const Matrix& detector_logits,
                                              std::span<const int> targets, double gamma,
                                              double temperature) {
  check_targets(detector_logits, targets);
  const Matrix probs = softmax_rows(detector_logits, temperature);
  std::vector<double> w(targets.size(), 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto s = static_cast<std::size_t>(targets[i]);
    if (targets[i] == 1 && argmax(probs.row(i)) == s) w[i] = focal_weight(probs(i, s), gamma);
  }
  return w;
}

}  // namespace debias
