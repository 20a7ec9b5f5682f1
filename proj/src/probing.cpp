#include "debias/probing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debias/data.hpp"
#include "debias/errors.hpp"
#include "debias/kernels.hpp"
#include "debias/optimizer.hpp"
#include "debias/random.hpp"
#include "debias/softmax.hpp"

namespace debias {

LinearModel train_linear(const Matrix& x, std::span<const int> targets, int classes,
                         const LinearTrainOptions& options) {
  if (classes < 2) throw ConfigError("linear head needs at least two classes");
  if (x.rows() != targets.size()) throw ConfigError("linear head: rows and targets differ");
  if (options.batch_size == 0 || options.epochs < 1) {
    throw ConfigError("linear head: batch_size and epochs must be positive");
  }
  const auto k = static_cast<std::size_t>(classes);
  for (int t : targets) {
    if (t < 0 || t >= classes) throw ConfigError("linear head: target out of range");
  }

  LinearModel model{Matrix(k, x.cols()), std::vector<double>(k, 0.0)};
  if (x.rows() == 0) return model;
  AdamState opt(AdamConfig{options.learning_rate}, {model.weight.size(), model.bias.size()});
  Rng rng(derive_seed(options.seed, stream::kProbe));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix gw(k, x.cols());
  std::vector<double> gb(k);
  Matrix logits, delta;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const Matrix xb = x.gather_rows(rows);
      kernels::affine(xb, model.weight, model.bias, logits);
      delta = softmax_rows(logits);
      const double inv_n = 1.0 / static_cast<double>(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        delta(i, static_cast<std::size_t>(targets[rows[i]])) -= 1.0;
        for (std::size_t c = 0; c < k; ++c) delta(i, c) *= inv_n;
      }
      kernels::weight_grad(delta, xb, gw, gb);
      opt.step({model.weight.values(), std::span<double>(model.bias)},
               {std::span<const double>(gw.values()), std::span<const double>(gb)});
    }
  }
  return model;
}

Matrix predict_proba(const LinearModel& model, const Matrix& x) {
  Matrix logits;
  kernels::affine(x, model.weight, model.bias, logits);
  return softmax_rows(logits);
}

Matrix extract_representations(const MlpParams& params, const Dataset& ds) {
  return encode(params, ds.features);
}

ProbeReport mdl_probe(const Matrix& representations, std::span<const int> z, int num_groups,
                      const ProbeOptions& options) {
  if (num_groups < 2) throw ConfigError("mdl_probe needs |Z| >= 2");
  if (representations.rows() != z.size()) {
    throw ConfigError("mdl_probe: representations and z differ in length");
  }
  const auto& fr = options.fractions;
  if (fr.empty() || fr.back() != 100.0) {
    throw ConfigError("mdl_probe: fractions must end at 100");
  }
  for (std::size_t i = 0; i < fr.size(); ++i) {
    if (!(fr[i] > (i == 0 ? 0.0 : fr[i - 1]))) {
      throw ConfigError("mdl_probe: fractions must be strictly increasing and positive");
    }
  }

  const std::size_t n = z.size();
  ProbeReport report;
  report.fractions = fr;
  for (double f : fr) {
    report.block_ends.push_back(
        static_cast<std::size_t>(std::llround(f / 100.0 * static_cast<double>(n))));
  }
  report.block_ends.back() = n;
  if (report.block_ends.front() == 0) throw ConfigError("mdl_probe: first block is empty");

  // One fixed shuffle for the whole schedule.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(options.training.seed, stream::kProbe, 0));
  std::shuffle(order.begin(), order.end(), rng);
  const Matrix x = representations.gather_rows(order);
  std::vector<int> zs(n);
  for (std::size_t i = 0; i < n; ++i) zs[i] = z[order[i]];

  const double bits_per_label = std::log2(static_cast<double>(num_groups));
  report.uniform_bits = static_cast<double>(n) * bits_per_label;
  report.block_bits.push_back(static_cast<double>(report.block_ends.front()) * bits_per_label);

  for (std::size_t b = 1; b < report.block_ends.size(); ++b) {
    const std::size_t seen = report.block_ends[b - 1];
    const std::size_t end = report.block_ends[b];
    std::vector<std::size_t> head(seen), block(end - seen);
    std::iota(head.begin(), head.end(), std::size_t{0});
    std::iota(block.begin(), block.end(), seen);
    LinearTrainOptions stage = options.training;
    stage.seed = derive_seed(options.training.seed, stream::kProbe, b);
    const LinearModel probe = train_linear(x.gather_rows(head),
                                           std::span<const int>(zs.data(), seen), num_groups,
                                           stage);
    const Matrix p = predict_proba(probe, x.gather_rows(block));
    double bits = 0.0;
    for (std::size_t i = 0; i < block.size(); ++i) {
      bits += clamped_nll(p(i, static_cast<std::size_t>(zs[seen + i]))) / std::log(2.0);
    }
    report.block_bits.push_back(bits);
  }
  report.codelength_bits = std::accumulate(report.block_bits.begin(), report.block_bits.end(), 0.0);
  report.compression = report.codelength_bits > 0.0 ? report.uniform_bits / report.codelength_bits
                                                    : 0.0;
  return report;
}

std::vector<ProbeRow> probe_sweep(std::span<const ProbeInput> models, const Dataset& ds,
                                  const ProbeOptions& options) {
  if (!ds.has_groups()) throw ConfigError("probe_sweep needs z in the probing set");
  for (const ProbeInput& m : models) {
    if (!m.params) throw ConfigError("probe_sweep: missing model");
  }
  std::vector<ProbeRow> rows(models.size());
#pragma omp parallel for schedule(dynamic) if (models.size() > 1)
  for (std::size_t i = 0; i < models.size(); ++i) {
    const ProbeInput& m = models[i];
    const Matrix reps = extract_representations(*m.params, ds);
    rows[i] = {m.gamma, m.temperature, m.seed,
               mdl_probe(reps, *ds.groups, ds.num_groups, options).compression};
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ProbeRow& a, const ProbeRow& b) {
    if (a.gamma != b.gamma) return a.gamma < b.gamma;
    if (a.temperature != b.temperature) return a.temperature < b.temperature;
    return a.seed < b.seed;
  });
  return rows;
}

}  // namespace debias
