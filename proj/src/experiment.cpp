#include "debias/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "debias/errors.hpp"

namespace debias {

Dataset load_source(const DataSource& source) {
  if (source.kind == DataSource::Kind::synthetic) return generate_synthetic(source.synthetic);
  return load_tabular(source.path, source.schema);
}

DataSplits prepare_data(const ExperimentConfig& cfg, const Dataset& full) {
  SplitSpec spec = cfg.split;
  if (!cfg.split_seed_set) spec.seed = cfg.train.seed;
  return split(full, spec);
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const DataSplits& splits) {
  if (!splits.test.has_groups() || !splits.val.has_groups()) {
    throw ConfigError("evaluation needs the protected attribute z in val and test");
  }
  RunOutcome out;
  out.training = train(cfg.train, splits.train, splits.val);
  if (splits.train.has_groups()) out.train_share = group_share_per_class(splits.train);

  out.test_eval = evaluate(out.training.best, splits.test);
  out.test_log = make_eval_log(splits.test, out.test_eval);
  out.test_report = fairness_report(out.test_log, out.train_share, cfg.smoothing);

  const Evaluation val_eval = evaluate(out.training.best, splits.val);
  out.val_report = fairness_report(make_eval_log(splits.val, val_eval), out.train_share,
                                   cfg.smoothing);
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const Dataset& full) {
  const SweepSpec& w = cfg.sweep;
  if (w.gammas.empty() || w.temperatures.empty() || w.seeds.empty()) {
    throw ConfigError("sweep grids and seed list must be nonempty");
  }

  // Splits depend on the seed only; build them once per seed.
  std::vector<std::optional<DataSplits>> splits(w.seeds.size());
  std::vector<std::string> split_errors(w.seeds.size());
  for (std::size_t s = 0; s < w.seeds.size(); ++s) {
    ExperimentConfig c = cfg;
    c.train.seed = w.seeds[s];
    try {
      splits[s] = prepare_data(c, full);
    } catch (const std::exception& e) {
      split_errors[s] = e.what();
    }
  }

  std::vector<SweepRow> rows;
  for (double g : w.gammas) {
    for (double t : w.temperatures) {
      for (std::uint64_t seed : w.seeds) {
        SweepRow row;
        row.gamma = g;
        row.temperature = t;
        row.seed = seed;
        rows.push_back(std::move(row));
      }
    }
  }

  const auto cells = static_cast<std::int64_t>(rows.size());
  const std::size_t seeds = w.seeds.size();
#pragma omp parallel for schedule(dynamic) num_threads(w.workers)
  for (std::int64_t i = 0; i < cells; ++i) {
    SweepRow& row = rows[static_cast<std::size_t>(i)];
    const std::size_t s = static_cast<std::size_t>(i) % seeds;
    if (!splits[s]) {
      row.error = split_errors[s];
      continue;
    }
    ExperimentConfig c = cfg;
    c.train.gamma = row.gamma;
    c.train.temperature = row.temperature;
    c.train.seed = row.seed;
    try {
      const RunOutcome r = run_experiment(c, *splits[s]);
      row.val_accuracy = r.training.val_accuracy[static_cast<std::size_t>(r.training.best_epoch)];
      row.val_report = r.val_report;
      row.test_report = r.test_report;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  return summarize_sweep(std::move(rows), w);
}

SweepResult summarize_sweep(std::vector<SweepRow> rows, const SweepSpec& spec) {
  SweepResult out;
  out.rows = std::move(rows);

  std::vector<std::vector<std::optional<double>>> val_metrics;
  for (const SweepRow& row : out.rows) {
    const bool seen = std::any_of(out.cells.begin(), out.cells.end(), [&](const SweepCell& c) {
      return c.gamma == row.gamma && c.temperature == row.temperature;
    });
    if (!seen) {
      SweepCell cell;
      cell.gamma = row.gamma;
      cell.temperature = row.temperature;
      out.cells.push_back(std::move(cell));
      val_metrics.emplace_back(spec.dto_metrics.size());
    }
  }

  const auto& names = fairness_metric_names();
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    SweepCell& cell = out.cells[c];
    std::vector<double> sums(names.size(), 0.0);
    std::vector<std::size_t> counts(names.size(), 0);
    std::vector<double> val_sums(spec.dto_metrics.size(), 0.0);
    std::vector<std::size_t> val_counts(spec.dto_metrics.size(), 0);
    for (const SweepRow& row : out.rows) {
      if (!row.ok || row.gamma != cell.gamma || row.temperature != cell.temperature) continue;
      ++cell.runs;
      cell.val_accuracy += row.val_accuracy;
      for (std::size_t m = 0; m < names.size(); ++m) {
        if (const auto v = row.test_report.metric(names[m])) {
          sums[m] += *v;
          ++counts[m];
        }
      }
      for (std::size_t m = 0; m < spec.dto_metrics.size(); ++m) {
        if (const auto v = row.val_report.metric(spec.dto_metrics[m])) {
          val_sums[m] += *v;
          ++val_counts[m];
        }
      }
    }
    if (cell.runs) cell.val_accuracy /= static_cast<double>(cell.runs);
    for (std::size_t m = 0; m < names.size(); ++m) {
      cell.test_means.emplace_back(
          names[m], counts[m] ? std::optional<double>(sums[m] / static_cast<double>(counts[m]))
                              : std::nullopt);
    }
    for (std::size_t m = 0; m < spec.dto_metrics.size(); ++m) {
      if (val_counts[m]) val_metrics[c][m] = val_sums[m] / static_cast<double>(val_counts[m]);
    }
  }

  const std::vector<double> fairness = normalized_fairness(val_metrics);
  std::vector<AccuracyCandidate> blind;
  std::vector<CandidateRun> dto;
  double max_accuracy = 0.0;
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    SweepCell& cell = out.cells[c];
    cell.val_fairness = fairness[c];
    if (!cell.runs) continue;
    blind.push_back({cell.gamma, cell.temperature, cell.val_accuracy});
    max_accuracy = std::max(max_accuracy, cell.val_accuracy);
    if (std::isfinite(cell.val_fairness)) {
      dto.push_back({cell.gamma, cell.temperature, cell.val_accuracy, cell.val_fairness, {}});
    }
  }
  if (!blind.empty()) out.blind = blind_select(blind, spec.threshold);
  if (!dto.empty()) {
    const CandidateRun& pick = dto_select(dto, max_accuracy);
    for (const SweepCell& cell : out.cells) {
      if (cell.gamma == pick.gamma && cell.temperature == pick.temperature) out.dto = cell;
    }
  }
  return out;
}

namespace {

std::string show(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

std::string csv_text(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "# schema=debias.sweep/1\n";
  out << "gamma,temperature,seed,status,val_accuracy";
  for (const auto& name : fairness_metric_names()) out << ',' << name;
  out << ",error\n";
  for (const SweepRow& row : result.rows) {
    out << format_double(row.gamma) << ',' << format_double(row.temperature) << ',' << row.seed
        << ',' << (row.ok ? "ok" : "failed") << ',';
    if (row.ok) {
      out << format_double(row.val_accuracy);
      for (const auto& name : fairness_metric_names()) out << ',' << show(row.test_report.metric(name));
    } else {
      out << "undefined";
      for (std::size_t m = 0; m < fairness_metric_names().size(); ++m) out << ",undefined";
    }
    out << ',' << csv_text(row.error) << '\n';
  }
  return out.str();
}

std::string heatmap_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "# schema=debias.heatmap/1\n";
  out << "gamma,temperature,runs,val_accuracy,val_fairness";
  for (const auto& name : fairness_metric_names()) out << ",test_" << name;
  out << '\n';
  for (const SweepCell& cell : result.cells) {
    out << format_double(cell.gamma) << ',' << format_double(cell.temperature) << ','
        << cell.runs << ',' << (cell.runs ? format_double(cell.val_accuracy) : "undefined") << ','
        << (std::isfinite(cell.val_fairness) ? format_double(cell.val_fairness) : "undefined");
    for (const auto& [name, value] : cell.test_means) out << ',' << show(value);
    out << '\n';
  }
  return out.str();
}

std::string selection_text(const SweepResult& result) {
  std::ostringstream out;
  out << "schema=debias.selection/1\n";
  if (result.blind) {
    out << "blind.gamma=" << format_double(result.blind->gamma) << '\n'
        << "blind.temperature=" << format_double(result.blind->temperature) << '\n'
        << "blind.val_accuracy=" << format_double(result.blind->accuracy) << '\n'
        << "blind.cutoff=" << format_double(result.blind->cutoff) << '\n'
        << "blind.fallback=" << (result.blind->fallback ? "true" : "false") << '\n';
  } else {
    out << "blind=undefined\n";
  }
  if (result.dto) {
    out << "dto.gamma=" << format_double(result.dto->gamma) << '\n'
        << "dto.temperature=" << format_double(result.dto->temperature) << '\n'
        << "dto.val_accuracy=" << format_double(result.dto->val_accuracy) << '\n'
        << "dto.val_fairness=" << format_double(result.dto->val_fairness) << '\n';
  } else {
    out << "dto=undefined\n";
  }
  std::size_t failed = 0;
  for (const SweepRow& row : result.rows) failed += !row.ok;
  out << "runs=" << result.rows.size() << '\n' << "failed=" << failed << '\n';
  return out.str();
}

}  // namespace debias
