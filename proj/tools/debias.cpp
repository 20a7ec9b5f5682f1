// debias: command-line front end.
//
//   debias run           --config FILE [--output-root DIR] [--name NAME] [--overwrite]
//   debias sweep         --config FILE [--output-root DIR] [--workers N] [--overwrite]
//   debias compare       --a RUN... --b RUN... [--metrics LIST] [--output FILE]
//   debias probe         --runs RUN... [--split test|val|train] [--output FILE]
//   debias analyze       --run RUN [--split train|val|test] [--output FILE]
//   debias generate-data [--config FILE] --output FILE
//
// RUN is a run directory written by `debias run`. The output root defaults
// to $DEBIAS_OUTPUT_ROOT, then ./runs.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "debias/analysis.hpp"
#include "debias/checkpoint.hpp"
#include "debias/config.hpp"
#include "debias/errors.hpp"
#include "debias/experiment.hpp"
#include "debias/significance.hpp"

namespace fs = std::filesystem;
using namespace debias;

namespace {

constexpr int kUsageError = 2;

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DEBIAS_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void emit(const std::string& output, const std::string& text) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_file(output, text);
    std::cerr << "wrote " << output << '\n';
  }
}

// Refuses to reuse a non-empty directory unless overwriting.
void prepare_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) {
      throw ConfigError("output directory " + dir.string() +
                        " already exists; pass --overwrite to replace it");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

std::string show(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

std::string report_csv(const FairnessReport& report) {
  std::ostringstream out;
  out << "# schema=debias.report/" << FairnessReport::kSchemaVersion << '\n';
  const auto scalars = report.scalars();
  for (std::size_t i = 0; i < scalars.size(); ++i) out << (i ? "," : "") << scalars[i].first;
  out << '\n';
  for (std::size_t i = 0; i < scalars.size(); ++i) out << (i ? "," : "") << show(scalars[i].second);
  out << '\n';
  return out.str();
}

std::string eval_log_csv(const EvalLog& log) {
  std::ostringstream out;
  out << "# schema=debias.eval_log/1\ny,r,z";
  for (std::size_t c = 0; c < log.probabilities.cols(); ++c) out << ",p" << c;
  out << '\n';
  for (std::size_t i = 0; i < log.size(); ++i) {
    out << log.labels[i] << ',' << log.predictions[i] << ',' << log.groups[i];
    for (double p : log.probabilities.row(i)) out << ',' << format_double(p);
    out << '\n';
  }
  return out.str();
}

std::string training_csv(const TrainResult& r) {
  std::ostringstream out;
  out << "# schema=debias.training/1\nepoch,val_accuracy,mean_weight,mean_loss,best\n";
  for (std::size_t e = 0; e < r.val_accuracy.size(); ++e) {
    out << e << ',' << format_double(r.val_accuracy[e]) << ',' << format_double(r.mean_weight[e])
        << ',' << format_double(r.mean_loss[e]) << ','
        << (static_cast<int>(e) == r.best_epoch ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string detector_text(const TrainConfig& cfg, const TrainResult& r) {
  std::ostringstream out;
  out << "schema=debias.detector/1\n";
  const auto mode = detector_mode(cfg.mode);
  out << "mode=" << (mode ? std::string(to_string(*mode)) : "none") << '\n';
  if (r.detector.targets.empty()) {
    out << "val_accuracy=undefined\nval_ece=undefined\n";
  } else {
    out << "val_accuracy=" << format_double(r.detector.accuracy) << '\n'
        << "val_ece=" << format_double(ece(r.detector.confidence, r.detector.correct)) << '\n';
  }
  return out.str();
}

struct LoadedRun {
  ExperimentConfig config;
  Checkpoint checkpoint;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  const ConfigFile file = ConfigFile::load(dir / "config.txt");
  run.config = experiment_from_config(file);
  run.checkpoint = load_checkpoint(dir / "model.ckpt");
  if (run.checkpoint.config_hash != fnv1a(to_config_text(run.config))) {
    throw DataError(dir.string() + ": checkpoint config hash does not match config.txt");
  }
  return run;
}

const Dataset& pick_split(const DataSplits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

// --- verbs ---------------------------------------------------------------

int cmd_run(const std::string& config, const std::string& root, const std::string& name,
            bool overwrite) {
  ExperimentConfig cfg = experiment_from_config(ConfigFile::load(config));
  if (!name.empty()) cfg.name = name;
  const fs::path dir = output_root(root) / cfg.name;
  prepare_dir(dir, overwrite);

  const Dataset full = load_source(cfg.data);
  const DataSplits splits = prepare_data(cfg, full);
  const RunOutcome r = run_experiment(cfg, splits);

  const std::string text = to_config_text(cfg);
  write_file(dir / "config.txt", text);
  save_checkpoint({r.training.best, fnv1a(text)}, dir / "model.ckpt");
  write_file(dir / "eval_log.csv", eval_log_csv(r.test_log));
  write_file(dir / "report.txt", to_key_value(r.test_report));
  write_file(dir / "report.csv", report_csv(r.test_report));
  write_file(dir / "training.csv", training_csv(r.training));
  write_file(dir / "detector.txt", detector_text(cfg.train, r.training));
  std::cout << "run " << cfg.name << ": accuracy " << format_double(r.test_report.accuracy)
            << ", tpr_rms " << format_double(r.test_report.gaps.tpr_rms) << " -> " << dir.string()
            << '\n';
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& root, int workers, bool overwrite) {
  ExperimentConfig cfg = experiment_from_config(ConfigFile::load(config), true);
  if (workers > 0) cfg.sweep.workers = workers;
  const fs::path dir = output_root(root) / cfg.name;
  prepare_dir(dir, overwrite);

  const Dataset full = load_source(cfg.data);
  const SweepResult result = run_sweep(cfg, full);
  write_file(dir / "config.txt", to_config_text(cfg));
  write_file(dir / "sweep.csv", sweep_csv(result));
  write_file(dir / "heatmap.csv", heatmap_csv(result));
  write_file(dir / "selection.txt", selection_text(result));
  std::size_t failed = 0;
  for (const SweepRow& row : result.rows) {
    if (!row.ok) {
      ++failed;
      std::cerr << "warning: gamma=" << format_double(row.gamma)
                << " t=" << format_double(row.temperature) << " seed=" << row.seed
                << " failed: " << row.error << '\n';
    }
  }
  std::cout << "sweep " << cfg.name << ": " << result.rows.size() << " runs, " << failed
            << " failed -> " << dir.string() << '\n';
  return 0;
}

std::map<std::string, std::optional<double>> read_report(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "report.csv" : path;
  std::ifstream in(file);
  if (!in) throw DataError("cannot read report " + file.string());
  std::string line, header, values;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (header.empty()) {
      header = line;
    } else {
      values = line;
      break;
    }
  }
  if (values.empty()) throw DataError(file.string() + ": no report row");
  std::map<std::string, std::optional<double>> out;
  std::stringstream hs(header), vs(values);
  std::string key, val;
  while (std::getline(hs, key, ',') && std::getline(vs, val, ',')) {
    if (val == "undefined") {
      out[key] = std::nullopt;
    } else {
      try {
        std::size_t used = 0;
        out[key] = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
      } catch (const std::exception&) {
        throw DataError(file.string() + ": bad value '" + val + "' for " + key);
      }
    }
  }
  return out;
}

int cmd_compare(const std::vector<std::string>& a, const std::vector<std::string>& b,
                std::vector<std::string> metrics, const std::string& output) {
  if (metrics.empty()) {
    for (const auto& m : fairness_metric_names()) metrics.push_back(m);
  }
  if (a.size() != b.size()) {
    std::cerr << "warning: run sets differ in size (" << a.size() << " vs " << b.size()
              << "); using the unpaired test\n";
  }
  std::vector<std::map<std::string, std::optional<double>>> ra, rb;
  for (const auto& p : a) ra.push_back(read_report(p));
  for (const auto& p : b) rb.push_back(read_report(p));

  std::ostringstream out;
  out << "# schema=debias.compare/1\nmetric,n_a,n_b,mean_a,mean_b,difference,p_value,significant\n";
  for (const auto& m : metrics) {
    std::vector<double> xa, xb;
    const auto collect = [&](const auto& reports, std::vector<double>& xs) {
      for (const auto& r : reports) {
        const auto it = r.find(m);
        if (it == r.end()) throw ConfigError("unknown metric '" + m + "' in compare");
        if (it->second) xs.push_back(*it->second);
      }
    };
    collect(ra, xa);
    collect(rb, xb);
    out << m << ',' << xa.size() << ',' << xb.size() << ',';
    if (xa.size() < 2 || xb.size() < 2) {
      out << "undefined,undefined,undefined,undefined,undefined\n";
      continue;
    }
    const PermutationResult p = pitman_permutation_test(xa, xb);
    out << format_double(p.mean_a) << ',' << format_double(p.mean_b) << ','
        << format_double(p.difference) << ',' << format_double(p.p_value) << ','
        << (p.p_value < 0.05 ? "yes" : "no") << '\n';
  }
  emit(output, out.str());
  return 0;
}

int cmd_probe(const std::vector<std::string>& runs, const std::string& split_name,
              const std::string& output) {
  std::vector<LoadedRun> loaded;
  for (const auto& r : runs) loaded.push_back(load_run(r));

  std::ostringstream out;
  out << "# schema=debias.probe/1\ngamma,temperature,seed,compression,codelength_bits,uniform_bits\n";
  struct Row {
    double gamma, t;
    std::uint64_t seed;
    ProbeReport report;
  };
  std::vector<Row> rows;
  for (const LoadedRun& run : loaded) {
    const DataSplits splits = prepare_data(run.config, load_source(run.config.data));
    const Dataset& ds = pick_split(splits, split_name);
    if (!ds.has_groups()) throw ConfigError("probing needs z in the " + split_name + " split");
    const Matrix reps = extract_representations(run.checkpoint.params, ds);
    rows.push_back({run.config.train.gamma, run.config.train.temperature, run.config.train.seed,
                    mdl_probe(reps, *ds.groups, ds.num_groups, run.config.probe)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    if (x.gamma != y.gamma) return x.gamma < y.gamma;
    if (x.t != y.t) return x.t < y.t;
    return x.seed < y.seed;
  });
  std::map<std::pair<double, double>, std::pair<double, std::size_t>> means;
  for (const Row& r : rows) {
    out << format_double(r.gamma) << ',' << format_double(r.t) << ',' << r.seed << ','
        << format_double(r.report.compression) << ',' << format_double(r.report.codelength_bits)
        << ',' << format_double(r.report.uniform_bits) << '\n';
    auto& m = means[{r.gamma, r.t}];
    m.first += r.report.compression;
    ++m.second;
  }
  for (const auto& [key, m] : means) {
    out << format_double(key.first) << ',' << format_double(key.second) << ",mean,"
        << format_double(m.first / static_cast<double>(m.second)) << ",,\n";
  }
  emit(output, out.str());
  return 0;
}

int cmd_analyze(const std::string& run_dir, const std::string& split_name,
                const std::string& output) {
  const LoadedRun run = load_run(run_dir);
  if (run.config.train.mode != TrainMode::blind) {
    throw ConfigError("analyze needs a blind-mode run (its success detector)");
  }
  const DataSplits splits = prepare_data(run.config, load_source(run.config.data));
  const Dataset& ds = pick_split(splits, split_name);
  const MlpParams& params = run.checkpoint.params;

  const DetectorEval success =
      evaluate_detector(params, ds, DetectorMode::blind, run.config.train.temperature);
  LinearTrainOptions options;
  options.seed = run.config.train.seed;
  const LinearModel demog = train_posthoc_detector(params, ds, options);
  const std::vector<double> demog_probs = posthoc_target_probs(demog, params, ds);
  const Evaluation ev = evaluate(params, ds);
  std::vector<int> correct(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) correct[i] = ev.predictions[i] == ds.labels[i];

  emit(output, "# schema=debias.penalization/1\n" +
                   to_csv(penalization_table(success.target_prob, demog_probs, correct)));
  return 0;
}

int cmd_generate(const std::string& config, const std::string& output) {
  ExperimentConfig cfg;
  if (!config.empty()) cfg = experiment_from_config(ConfigFile::load(config), true);
  if (cfg.data.kind != DataSource::Kind::synthetic) {
    throw ConfigError("generate-data needs data.source = synthetic");
  }
  save_tabular(generate_synthetic(cfg.data.synthetic), output);
  std::cerr << "wrote " << output << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-aware training toolkit: DFL, baselines, fairness metrics, probing"};
  app.require_subcommand(1);

  std::string config, root, name, output, probe_split, analyze_split;
  bool overwrite = false;
  int workers = 0;
  std::vector<std::string> set_a, set_b, metrics, runs;

  auto* run = app.add_subcommand("run", "Train and evaluate one configuration");
  run->add_option("--config,-c", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--output-root", root, "Parent of the run directory");
  run->add_option("--name", name, "Run directory name (default: experiment.name)");
  run->add_flag("--overwrite", overwrite, "Replace an existing run directory");

  auto* sweep = app.add_subcommand("sweep", "Grid over gamma x t x seeds with both selections");
  sweep->add_option("--config,-c", config, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--output-root", root, "Parent of the sweep directory");
  sweep->add_option("--workers,-j", workers, "Cells run in parallel")->check(CLI::PositiveNumber);
  sweep->add_flag("--overwrite", overwrite, "Replace an existing sweep directory");

  auto* compare = app.add_subcommand("compare", "Pitman permutation test between two run sets");
  compare->add_option("--a", set_a, "Run directories or report.csv files")->required();
  compare->add_option("--b", set_b, "Run directories or report.csv files")->required();
  compare->add_option("--metrics", metrics, "Metrics to compare (default: all)")->delimiter(',');
  compare->add_option("--output,-o", output, "Output file (default: stdout)");

  auto* probe = app.add_subcommand("probe", "MDL probing of z from run encoders");
  probe->add_option("--runs", runs, "Run directories")->required();
  probe->add_option("--split", probe_split, "Probing split")->default_val("test");
  probe->add_option("--output,-o", output, "Output file (default: stdout)");

  auto* analyze = app.add_subcommand("analyze", "Detector penalization table for a blind run");
  analyze->add_option("--run", name, "Blind-mode run directory")->required();
  analyze->add_option("--split", analyze_split, "Analysed split")->default_val("train");
  analyze->add_option("--output,-o", output, "Output file (default: stdout)");

  auto* generate = app.add_subcommand("generate-data", "Write a synthetic dataset as CSV");
  generate->add_option("--config,-c", config, "Config file ([data] section)")
      ->check(CLI::ExistingFile);
  generate->add_option("--output,-o", output, "CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, root, name, overwrite);
    if (*sweep) return cmd_sweep(config, root, workers, overwrite);
    if (*compare) return cmd_compare(set_a, set_b, metrics, output);
    if (*probe) return cmd_probe(runs, probe_split, output);
    if (*analyze) return cmd_analyze(name, analyze_split, output);
    if (*generate) return cmd_generate(config, output);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
