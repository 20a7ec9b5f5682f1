#include "debias/fairness.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "debias/data.hpp"
#include "debias/errors.hpp"
#include "debias/trainer.hpp"

namespace debias {

namespace {

std::optional<double> rate(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> abs_gap(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return std::abs(*a - *b);
}

std::size_t idx(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void EvalLog::validate() const {
  const std::size_t n = labels.size();
  if (predictions.size() != n || groups.size() != n) {
    throw ConfigError("eval log: column lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 ||
        predictions[i] >= num_classes) {
      throw ConfigError("eval log: label or prediction out of range at row " + std::to_string(i));
    }
    if (groups[i] < 0 || groups[i] >= num_groups) {
      throw ConfigError("eval log: group out of range at row " + std::to_string(i));
    }
  }
  if (!probabilities.empty()) {
    if (probabilities.rows() != n || probabilities.cols() != static_cast<std::size_t>(num_classes)) {
      throw ConfigError("eval log: probability matrix shape mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (double p : probabilities.row(i)) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("eval log: probability outside [0,1]");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) throw ConfigError("eval log: probabilities do not sum to 1");
    }
  }
}

EvalLog make_eval_log(const Dataset& ds, const Evaluation& ev) {
  if (!ds.has_groups()) throw DataError("fairness evaluation needs the protected attribute");
  EvalLog log;
  log.labels = ds.labels;
  log.predictions = ev.predictions;
  log.groups = *ds.groups;
  log.probabilities = ev.probabilities;
  log.num_classes = ds.num_classes;
  log.num_groups = ds.num_groups;
  return log;
}

std::vector<std::optional<double>> GapMetrics::tpr_gaps() const {
  std::vector<std::optional<double>> out;
  for (const auto& c : per_class) out.push_back(c.tpr);
  return out;
}

std::vector<std::optional<double>> GapMetrics::fpr_gaps() const {
  std::vector<std::optional<double>> out;
  for (const auto& c : per_class) out.push_back(c.fpr);
  return out;
}

std::vector<std::optional<double>> GapMetrics::precision_gaps() const {
  std::vector<std::optional<double>> out;
  for (const auto& c : per_class) out.push_back(c.precision);
  return out;
}

GapMetrics gap_metrics(const EvalLog& log) {
  log.validate();
  if (log.num_groups != 2) throw ConfigError("gap metrics need a binary protected attribute");
  const auto k = idx(log.num_classes);
  // [class][group]
  std::vector<std::array<std::size_t, 2>> positives(k), true_pos(k), predicted(k), false_pos(k);
  std::array<std::size_t, 2> group_total{0, 0};
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto y = idx(log.labels[i]), r = idx(log.predictions[i]), z = idx(log.groups[i]);
    ++group_total[z];
    ++positives[y][z];
    ++predicted[r][z];
    if (r == y) {
      ++true_pos[y][z];
    } else {
      ++false_pos[r][z];
    }
  }

  GapMetrics out;
  out.per_class.resize(k);
  double tpr_sq = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::array<std::optional<double>, 2> tpr, fpr, prec;
    for (std::size_t z = 0; z < 2; ++z) {
      tpr[z] = rate(true_pos[c][z], positives[c][z]);
      fpr[z] = rate(false_pos[c][z], group_total[z] - positives[c][z]);
      prec[z] = rate(true_pos[c][z], predicted[c][z]);
    }
    ClassGaps& g = out.per_class[c];
    g.tpr = abs_gap(tpr[0], tpr[1]);
    g.fpr = abs_gap(fpr[0], fpr[1]);
    g.precision = abs_gap(prec[0], prec[1]);
    if (g.tpr) {
      out.tpr_sum += *g.tpr;
      tpr_sq += *g.tpr * *g.tpr;
      ++out.tpr_defined;
    }
    if (g.fpr) {
      out.fpr_sum += *g.fpr;
      ++out.fpr_defined;
    }
    if (g.precision) {
      out.precision_sum += *g.precision;
      ++out.precision_defined;
    }
  }
  out.tpr_rms = out.tpr_defined == 0 ? 0.0 : std::sqrt(tpr_sq / static_cast<double>(out.tpr_defined));
  return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> gap_correlation(std::span<const std::optional<double>> gaps,
                                      std::span<const double> train_share) {
  if (gaps.size() != train_share.size()) throw ConfigError("gap_correlation: length mismatch");
  std::vector<double> x, y;
  for (std::size_t c = 0; c < gaps.size(); ++c) {
    if (gaps[c] && std::isfinite(train_share[c])) {
      x.push_back(*gaps[c]);
      y.push_back(train_share[c]);
    }
  }
  if (x.size() < 3) return std::nullopt;
  return pearson(x, y);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("kl_divergence: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    if (q[k] <= 0.0) return std::numeric_limits<double>::infinity();
    total += p[k] * std::log(p[k] / q[k]);
  }
  return total;
}

std::vector<double> smoothed_distribution(std::span<const std::size_t> counts, double alpha) {
  double total = 0.0;
  for (std::size_t c : counts) total += static_cast<double>(c);
  const double denom = total + alpha * static_cast<double>(counts.size());
  std::vector<double> out;
  out.reserve(counts.size());
  for (std::size_t c : counts) out.push_back((static_cast<double>(c) + alpha) / denom);
  return out;
}

namespace {

using CountTable = std::vector<std::size_t>;

// Sum over z of KL(P(outcome | cond) || P(outcome | cond, z)) for one
// conditioning value, given the joint counts [z][outcome].
void add_conditional_terms(const std::vector<CountTable>& by_group, double alpha, KlMetric& out) {
  const std::size_t outcomes = by_group.front().size();
  CountTable pooled(outcomes, 0);
  for (const auto& row : by_group) {
    for (std::size_t k = 0; k < outcomes; ++k) pooled[k] += row[k];
  }
  std::size_t pooled_total = 0;
  for (std::size_t c : pooled) pooled_total += c;
  if (pooled_total == 0) {
    out.skipped += by_group.size();
    return;
  }
  const auto p = smoothed_distribution(pooled, alpha);
  for (const auto& row : by_group) {
    std::size_t total = 0;
    for (std::size_t c : row) total += c;
    if (total == 0) {
      ++out.skipped;
      continue;
    }
    out.value += kl_divergence(p, smoothed_distribution(row, alpha));
    ++out.terms;
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("smoothing alpha must be >= 0");
}

}  // namespace

KlMetric independence(const EvalLog& log, double alpha) {
  log.validate();
  check_alpha(alpha);
  std::vector<CountTable> by_group(idx(log.num_groups), CountTable(idx(log.num_classes), 0));
  for (std::size_t i = 0; i < log.size(); ++i) {
    ++by_group[idx(log.groups[i])][idx(log.predictions[i])];
  }
  KlMetric out;
  add_conditional_terms(by_group, alpha, out);
  return out;
}

KlMetric separation(const EvalLog& log, double alpha) {
  log.validate();
  check_alpha(alpha);
  // [y][z][r]
  std::vector<std::vector<CountTable>> counts(
      idx(log.num_classes),
      std::vector<CountTable>(idx(log.num_groups), CountTable(idx(log.num_classes), 0)));
  for (std::size_t i = 0; i < log.size(); ++i) {
    ++counts[idx(log.labels[i])][idx(log.groups[i])][idx(log.predictions[i])];
  }
  KlMetric out;
  for (const auto& by_group : counts) add_conditional_terms(by_group, alpha, out);
  return out;
}

KlMetric sufficiency(const EvalLog& log, double alpha) {
  log.validate();
  check_alpha(alpha);
  // [r][z][y]
  std::vector<std::vector<CountTable>> counts(
      idx(log.num_classes),
      std::vector<CountTable>(idx(log.num_groups), CountTable(idx(log.num_classes), 0)));
  for (std::size_t i = 0; i < log.size(); ++i) {
    ++counts[idx(log.predictions[i])][idx(log.groups[i])][idx(log.labels[i])];
  }
  KlMetric out;
  for (const auto& by_group : counts) add_conditional_terms(by_group, alpha, out);
  return out;
}

double ece(std::span<const double> confidence, std::span<const int> correct, int bins) {
  if (confidence.size() != correct.size()) throw ConfigError("ece: length mismatch");
  if (bins < 1) throw ConfigError("ece: bins must be >= 1");
  const std::size_t n = confidence.size();
  if (n == 0) return 0.0;
  std::vector<double> conf_sum(idx(bins), 0.0), hits(idx(bins), 0.0);
  std::vector<std::size_t> count(idx(bins), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = confidence[i];
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("ece: confidence outside [0,1]");
    const auto b = std::min(idx(bins) - 1, static_cast<std::size_t>(c * bins));
    conf_sum[b] += c;
    hits[b] += correct[i] != 0 ? 1.0 : 0.0;
    ++count[b];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < idx(bins); ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    total += nb / static_cast<double>(n) * std::abs(hits[b] / nb - conf_sum[b] / nb);
  }
  return total;
}

const std::vector<std::string>& fairness_metric_names() {
  static const std::vector<std::string> names = {
      "accuracy", "tpr_sum",      "tpr_rms",    "fpr_sum",    "precision_sum", "tpr_p",
      "fpr_p",    "precision_p",  "independence", "separation", "sufficiency"};
  return names;
}

std::vector<std::pair<std::string, std::optional<double>>> FairnessReport::scalars() const {
  return {{"accuracy", accuracy},
          {"tpr_sum", gaps.tpr_sum},
          {"tpr_rms", gaps.tpr_rms},
          {"fpr_sum", gaps.fpr_sum},
          {"precision_sum", gaps.precision_sum},
          {"tpr_p", tpr_p},
          {"fpr_p", fpr_p},
          {"precision_p", precision_p},
          {"independence", independence.value},
          {"separation", separation.value},
          {"sufficiency", sufficiency.value}};
}

std::optional<double> FairnessReport::metric(std::string_view name) const {
  for (const auto& [key, value] : scalars()) {
    if (key == name) return value;
  }
  throw ConfigError("unknown fairness metric '" + std::string(name) + "'");
}

FairnessReport fairness_report(const EvalLog& log, std::span<const double> train_share,
                               double alpha) {
  FairnessReport r;
  r.samples = log.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < log.size(); ++i) hits += log.labels[i] == log.predictions[i];
  r.accuracy = log.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(log.size());
  r.gaps = gap_metrics(log);
  if (!train_share.empty()) {
    const auto tpr = r.gaps.tpr_gaps(), fpr = r.gaps.fpr_gaps(), prec = r.gaps.precision_gaps();
    r.tpr_p = gap_correlation(tpr, train_share);
    r.fpr_p = gap_correlation(fpr, train_share);
    r.precision_p = gap_correlation(prec, train_share);
  }
  r.independence = independence(log, alpha);
  r.separation = separation(log, alpha);
  r.sufficiency = sufficiency(log, alpha);
  r.smoothing = alpha;
  return r;
}

namespace {
std::string show(std::optional<double> v) {
  return v ? format_double(*v) : std::string("undefined");
}
}  // namespace

std::string to_key_value(const FairnessReport& report) {
  std::ostringstream out;
  out << "schema=debias.fairness_report/" << FairnessReport::kSchemaVersion << '\n';
  out << "samples=" << report.samples << '\n';
  out << "smoothing=" << format_double(report.smoothing) << '\n';
  for (const auto& [key, value] : report.scalars()) out << key << '=' << show(value) << '\n';
  const std::size_t k = report.gaps.per_class.size();
  out << "coverage.tpr=" << report.gaps.tpr_defined << '/' << k << '\n';
  out << "coverage.fpr=" << report.gaps.fpr_defined << '/' << k << '\n';
  out << "coverage.precision=" << report.gaps.precision_defined << '/' << k << '\n';
  out << "coverage.independence.skipped=" << report.independence.skipped << '\n';
  out << "coverage.separation.skipped=" << report.separation.skipped << '\n';
  out << "coverage.sufficiency.skipped=" << report.sufficiency.skipped << '\n';
  for (std::size_t c = 0; c < k; ++c) {
    const auto& g = report.gaps.per_class[c];
    out << "gap.tpr.class" << c << '=' << show(g.tpr) << '\n';
    out << "gap.fpr.class" << c << '=' << show(g.fpr) << '\n';
    out << "gap.precision.class" << c << '=' << show(g.precision) << '\n';
  }
  return out.str();
}

}  // namespace debias
