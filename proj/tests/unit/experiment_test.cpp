#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "debias/experiment.hpp"
#include "debias/selection.hpp"

namespace {

using namespace debias;

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.data.synthetic.samples = 800;
  cfg.data.synthetic.task_dims = 2;
  cfg.data.synthetic.demographic_dims = 2;
  cfg.data.synthetic.demographic_noise = 0.5;
  cfg.train.mode = TrainMode::blind;
  cfg.train.epochs = 1;
  cfg.train.hidden_width = 8;
  cfg.train.main_lr = 5e-3;
  return cfg;
}

TEST(Sweep, OneCellEqualsSingleRun) {
  auto cfg = small_experiment();
  cfg.sweep.gammas = {4};
  cfg.sweep.temperatures = {2};
  cfg.sweep.seeds = {5};
  const auto full = load_source(cfg.data);
  const auto sweep = run_sweep(cfg, full);
  ASSERT_EQ(sweep.rows.size(), 1u);
  ASSERT_TRUE(sweep.rows[0].ok);

  auto single = cfg;
  single.train.gamma = 4;
  single.train.temperature = 2;
  single.train.seed = 5;
  const auto run = run_experiment(single, prepare_data(single, full));
  EXPECT_EQ(sweep.rows[0].val_accuracy, run.training.val_accuracy[run.training.best_epoch]);
  EXPECT_EQ(to_key_value(sweep.rows[0].test_report), to_key_value(run.test_report));
}

TEST(Sweep, GridCardinalityAndOfflineBlindSelection) {
  auto cfg = small_experiment();
  cfg.sweep.seeds = {0, 1};
  cfg.sweep.workers = 2;
  const auto res = run_sweep(cfg, load_source(cfg.data));
  ASSERT_EQ(res.rows.size(), 40u);
  ASSERT_EQ(res.cells.size(), 20u);

  // Recompute the per-cell means from the emitted rows and select offline.
  std::vector<AccuracyCandidate> table;
  for (std::size_t c = 0; c < 20; ++c) {
    const auto& a = res.rows[2 * c];
    const auto& b = res.rows[2 * c + 1];
    ASSERT_EQ(a.gamma, b.gamma);
    ASSERT_EQ(a.temperature, b.temperature);
    table.push_back({a.gamma, a.temperature, (a.val_accuracy + b.val_accuracy) / 2});
  }
  const auto offline = blind_select(table, cfg.sweep.threshold);
  ASSERT_TRUE(res.blind.has_value());
  EXPECT_EQ(res.blind->gamma, offline.gamma);
  EXPECT_EQ(res.blind->temperature, offline.temperature);
  EXPECT_TRUE(res.dto.has_value());

  std::istringstream csv(sweep_csv(res));
  std::string line;
  std::size_t data_lines = 0;
  while (std::getline(csv, line)) {
    if (!line.empty() && line[0] != '#' && line.rfind("gamma,", 0) != 0) ++data_lines;
  }
  EXPECT_EQ(data_lines, 40u);
}

TEST(Sweep, FailedCellIsRecorded) {
  auto cfg = small_experiment();
  cfg.sweep.gammas = {-1, 2};
  cfg.sweep.temperatures = {1};
  cfg.sweep.seeds = {0};
  const auto res = run_sweep(cfg, load_source(cfg.data));
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_FALSE(res.rows[0].ok);
  EXPECT_FALSE(res.rows[0].error.empty());
  EXPECT_TRUE(res.rows[1].ok);
  ASSERT_TRUE(res.blind.has_value());
  EXPECT_EQ(res.blind->gamma, 2);
  EXPECT_NE(selection_text(res).find("failed"), std::string::npos);
}

TEST(Run, RequiresGroupsForEvaluation) {
  auto cfg = small_experiment();
  cfg.train.mode = TrainMode::vanilla;
  auto splits = prepare_data(cfg, load_source(cfg.data));
  splits.test.groups.reset();
  EXPECT_THROW(run_experiment(cfg, splits), std::exception);
}

TEST(Run, SplitSeedFollowsRunSeed) {
  auto cfg = small_experiment();
  const auto full = load_source(cfg.data);
  cfg.train.seed = 3;
  const auto a = prepare_data(cfg, full);
  cfg.train.seed = 4;
  const auto b = prepare_data(cfg, full);
  EXPECT_NE(a.indices.train, b.indices.train);
  cfg.split_seed_set = true;
  cfg.split.seed = 9;
  const auto c = prepare_data(cfg, full);
  cfg.train.seed = 3;
  EXPECT_EQ(prepare_data(cfg, full).indices.train, c.indices.train);
}

}  // namespace
