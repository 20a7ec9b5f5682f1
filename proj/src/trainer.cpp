#include "debias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "debias/errors.hpp"
#include "debias/optimizer.hpp"
#include "debias/random.hpp"
#include "debias/softmax.hpp"

namespace debias {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::vanilla: return "vanilla";
    case TrainMode::dfl_demog: return "dfl-demog";
    case TrainMode::blind: return "blind";
    case TrainMode::control: return "control";
    case TrainMode::jtt: return "jtt";
  }
  return "unknown";
}

std::optional<TrainMode> parse_train_mode(std::string_view text) {
  if (text == "vanilla" || text == "finetuned") return TrainMode::vanilla;
  if (text == "dfl-demog" || text == "demog") return TrainMode::dfl_demog;
  if (text == "blind") return TrainMode::blind;
  if (text == "control") return TrainMode::control;
  if (text == "jtt") return TrainMode::jtt;
  return std::nullopt;
}

std::optional<DetectorMode> detector_mode(TrainMode mode) {
  switch (mode) {
    case TrainMode::dfl_demog: return DetectorMode::demog;
    case TrainMode::blind: return DetectorMode::blind;
    case TrainMode::control: return DetectorMode::control;
    default: return std::nullopt;
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(main_lr > 0.0)) throw ConfigError("main_lr must be > 0");
  if (!(detector_lr > 0.0)) throw ConfigError("detector_lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (hidden_width < 1 || depth < 1) throw ConfigError("hidden_width and depth must be >= 1");
  if (detector_mode(mode)) DflConfig{*detector_mode(mode), gamma, temperature}.validate();
  if (mode == TrainMode::jtt) {
    if (jtt_upweight < 4 || jtt_upweight > 6) throw ConfigError("jtt upweight must be in {4,5,6}");
    if (jtt_epoch < 1 || jtt_epoch > 2) throw ConfigError("jtt epoch must be in {1,2}");
  }
}

MlpShape TrainConfig::shape_for(const Dataset& train) const {
  MlpShape shape;
  shape.input_dim = train.dim();
  shape.hidden_width = hidden_width;
  shape.depth = depth;
  shape.num_classes = static_cast<std::size_t>(train.num_classes);
  shape.detector_outputs =
      mode == TrainMode::dfl_demog ? static_cast<std::size_t>(train.num_groups) : 2;
  return shape;
}

Evaluation evaluate(const MlpParams& params, const Dataset& ds) {
  const ForwardCache cache = forward(params, ds.features);
  Evaluation ev;
  ev.probabilities = softmax_rows(cache.main_logits);
  ev.predictions.resize(ds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ev.predictions[i] = static_cast<int>(argmax(cache.main_logits.row(i)));
    if (ev.predictions[i] == ds.labels[i]) ++hits;
  }
  ev.accuracy = ds.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(ds.size());
  return ev;
}

DetectorEval evaluate_detector(const MlpParams& params, const Dataset& ds, DetectorMode mode,
                               double temperature) {
  DetectorEval out;
  if (mode == DetectorMode::control) return out;
  if (mode == DetectorMode::demog && !ds.has_groups()) return out;
  const ForwardCache cache = forward(params, ds.features);
  TargetInputs in;
  in.mode = mode;
  in.labels = ds.labels;
  if (ds.has_groups()) in.groups = *ds.groups;
  in.main_logits = &cache.main_logits;
  out.targets = detector_targets(in);
  const Matrix probs = softmax_rows(cache.detector_logits, temperature);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto s = static_cast<std::size_t>(out.targets[i]);
    const std::size_t guess = argmax(probs.row(i));
    out.target_prob.push_back(probs(i, s));
    out.confidence.push_back(probs(i, guess));
    out.correct.push_back(guess == s ? 1 : 0);
    hits += guess == s;
  }
  out.accuracy = ds.size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(ds.size());
  return out;
}

TrainResult train_on_rows(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                          std::span<const std::size_t> rows, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto detector = detector_mode(cfg.mode);
  if (detector == DetectorMode::demog && !train.has_groups()) {
    throw ConfigError("dfl-demog training needs the protected attribute z in the train set");
  }
  if (val.dim() != train.dim()) throw ConfigError("train/val feature dims differ");
  if (rows.empty()) throw ConfigError("empty training set");
  for (std::size_t r : rows) {
    if (r >= train.size()) throw ConfigError("training row index out of range");
  }

  const MlpShape shape = cfg.shape_for(train);
  MlpParams params = init_params(shape, cfg.seed);
  AdamState main_opt(AdamConfig{cfg.main_lr, 0.9, 0.999, 1e-8, cfg.weight_decay},
                     tensor_sizes(params.main_tensors()));
  AdamState detector_opt(AdamConfig{cfg.detector_lr, 0.9, 0.999, 1e-8, 0.0},
                         tensor_sizes(params.detector_tensors()));

  TrainResult result;
  double best_accuracy = -1.0;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<std::size_t> batch_rows;
  std::vector<int> batch_labels, batch_groups;
  std::vector<double> ones;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, stream::kEpochShuffle, static_cast<std::uint64_t>(epoch)));
    std::copy(rows.begin(), rows.end(), order.begin());
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double weight_sum = 0.0, loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(stop));
      batch_labels.clear();
      batch_groups.clear();
      for (std::size_t r : batch_rows) {
        batch_labels.push_back(train.labels[r]);
        if (train.has_groups()) batch_groups.push_back(train.group(r));
      }
      const ForwardCache cache = forward(params, train.features.gather_rows(batch_rows));
      const auto where = [&] {
        return " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) + ")";
      };

      std::vector<double> weights;
      std::optional<DetectorGradients> detector_grads;
      if (detector) {
        TargetInputs in;
        in.mode = *detector;
        in.labels = batch_labels;
        in.groups = batch_groups;
        in.main_logits = &cache.main_logits;
        in.sample_ids = batch_rows;
        in.seed = cfg.seed;
        in.epoch = epoch;
        const std::vector<int> targets = detector_targets(in);
        weights = cfg.joint_success_only && *detector == DetectorMode::blind
                      ? dfl_weights_joint_success(cache.detector_logits, targets, cfg.gamma,
                                                  cfg.temperature)
                      : dfl_weights(cache.detector_logits, targets, cfg.gamma, cfg.temperature);
        if (!std::isfinite(detector_loss(cache, targets, cfg.temperature))) {
          throw NumericalError("non-finite detector loss" + where());
        }
        detector_grads = detector_backward(params, cache, targets, cfg.temperature);
      } else {
        ones.assign(batch_rows.size(), 1.0);
        weights = ones;
      }

      const double loss = weighted_cross_entropy_loss(cache, batch_labels, weights);
      if (!std::isfinite(loss)) throw NumericalError("non-finite loss" + where());
      const MainGradients main_grads =
          weighted_cross_entropy_backward(params, cache, batch_labels, weights);
      try {
        if (detector_grads) detector_opt.step(params.detector_tensors(), detector_grads->tensors());
        main_opt.step(params.main_tensors(), main_grads.tensors());
      } catch (const NumericalError& e) {
        throw NumericalError(e.what() + where());
      }
      loss_sum += loss;
      for (double w : weights) weight_sum += w;
    }

    const double accuracy = evaluate(params, val).accuracy;
    result.val_accuracy.push_back(accuracy);
    result.mean_weight.push_back(weight_sum / static_cast<double>(order.size()));
    result.mean_loss.push_back(loss_sum / static_cast<double>(batches));
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      result.best = params;
      result.best_epoch = epoch;
    }
    if (on_epoch) {
      on_epoch(EpochReport{epoch, accuracy, result.mean_weight.back(), result.mean_loss.back(),
                           &params});
    }
  }
  result.steps = main_opt.steps();
  if (detector) result.detector = evaluate_detector(result.best, val, *detector, cfg.temperature);
  return result;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train, const Dataset& val,
                  const EpochCallback& on_epoch) {
  if (cfg.mode == TrainMode::jtt) return train_jtt(cfg, train, val).stage2;
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_on_rows(cfg, train, val, rows, on_epoch);
}

JttResult train_jtt(const TrainConfig& cfg, const Dataset& train, const Dataset& val) {
  if (cfg.mode != TrainMode::jtt) throw ConfigError("train_jtt requires mode = jtt");
  cfg.validate();

  TrainConfig stage = cfg;
  stage.mode = TrainMode::vanilla;
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  // Stage 1: plain training for T epochs; the epoch-T model identifies errors.
  JttResult out;
  TrainConfig stage1 = stage;
  stage1.epochs = cfg.jtt_epoch;
  train_on_rows(stage1, train, val, rows, [&](const EpochReport& r) {
    if (r.epoch + 1 == cfg.jtt_epoch) out.stage1_model = *r.params;
  });
  const Evaluation ev = evaluate(out.stage1_model, train);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (ev.predictions[i] != train.labels[i]) out.misclassified.push_back(i);
  }

  // Stage 2: from scratch on the upsampled multiset (indices only).
  out.stage2_rows = rows;
  for (std::size_t i : out.misclassified) {
    for (int rep = 1; rep < cfg.jtt_upweight; ++rep) out.stage2_rows.push_back(i);
  }
  out.degenerate = out.misclassified.empty();
  if (out.degenerate) {
    std::cerr << "warning: jtt stage 1 misclassified no training samples; stage 2 equals vanilla\n";
  }
  out.stage2 = train_on_rows(stage, train, val, out.stage2_rows);
  return out;
}

}  // namespace debias
