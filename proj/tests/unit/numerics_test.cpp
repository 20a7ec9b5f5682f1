#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "debias/errors.hpp"
#include "debias/mlp.hpp"
#include "debias/optimizer.hpp"
#include "debias/softmax.hpp"

namespace {

using namespace debias;

TEST(Softmax, SymmetricLogits) {
  const auto p = softmax_with_temperature(std::vector<double>{0.0, 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, TemperatureScalesLogits) {
  const auto p = softmax_with_temperature(std::vector<double>{2.0, 0.0}, 2.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.7311, 1e-4);
  EXPECT_NEAR(p[1], 0.2689, 1e-4);
}

TEST(Softmax, LargeTemperatureIsUniform) {
  const auto p = softmax_with_temperature(std::vector<double>{5.0, -3.0, 1.0}, 1e6);
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-5);
}

TEST(Softmax, SumsToOneAndPositive) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(5);
    for (double& v : logits) v = d(rng);
    const auto p = softmax_with_temperature(logits, 0.5 + trial * 0.1);
    double s = 0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Softmax, RejectsBadTemperature) {
  const std::vector<double> l{1.0, 2.0};
  EXPECT_THROW(softmax_with_temperature(l, 0.0), ConfigError);
  EXPECT_THROW(softmax_with_temperature(l, -1.0), ConfigError);
  EXPECT_THROW(softmax_with_temperature(l, NAN), ConfigError);
}

TEST(Softmax, ArgmaxTiesGoLow) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.0, 0.0}), 0u);
}

TEST(Mlp, ZeroParamsGiveUniformOutput) {
  const MlpShape shape{3, 4, 2, 3, 2};
  const auto params = zero_params(shape);
  const Matrix x = Matrix::from_rows({{1.0, -2.0, 3.0}, {0.5, 0.5, 0.5}});
  const auto cache = forward(params, x);
  for (double v : cache.main_logits.values()) EXPECT_EQ(v, 0.0);
  const Matrix p = softmax_rows(cache.main_logits);
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Mlp, HandComputedForward) {
  MlpParams params = zero_params(MlpShape{2, 2, 1, 2, 2});
  params.encoder[0].weight = Matrix::from_rows({{1.0, 0.0}, {0.5, -1.0}});
  params.encoder[0].bias = {0.1, 0.2};
  params.main_head.weight = Matrix::from_rows({{2.0, 1.0}, {-1.0, 3.0}});
  params.main_head.bias = {0.0, 0.5};
  const Matrix x = Matrix::from_rows({{1.0, 2.0}});
  const auto cache = forward(params, x);
  // h = relu([1*1 + 0*2 + 0.1, 0.5*1 - 1*2 + 0.2]) = [1.1, 0]
  EXPECT_NEAR(cache.representation()(0, 0), 1.1, 1e-15);
  EXPECT_EQ(cache.representation()(0, 1), 0.0);
  EXPECT_NEAR(cache.main_logits(0, 0), 2.2, 1e-15);
  EXPECT_NEAR(cache.main_logits(0, 1), -1.1 + 0.5, 1e-15);
}

TEST(Mlp, IdenticalRowsGiveIdenticalLogits) {
  const auto params = init_params(MlpShape{4, 8, 2, 3, 2}, 9);
  Matrix x(6, 4);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = 0.3 * double(j) - 0.2;
  }
  const auto cache = forward(params, x);
  for (std::size_t i = 1; i < 6; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cache.main_logits(i, j), cache.main_logits(0, j));
  }
}

TEST(Mlp, InitIsSeededAndBounded) {
  const MlpShape shape{5, 16, 2, 2, 2};
  EXPECT_EQ(init_params(shape, 4), init_params(shape, 4));
  EXPECT_NE(init_params(shape, 4), init_params(shape, 5));
  const auto p = init_params(shape, 4);
  const double bound = std::sqrt(6.0 / 5.0);
  for (double v : p.encoder[0].weight.values()) EXPECT_LE(std::fabs(v), bound);
  for (double v : p.encoder[0].bias) EXPECT_EQ(v, 0.0);
  // Detector size does not move the main parameters.
  MlpShape wider = shape;
  wider.detector_outputs = 3;
  const auto q = init_params(wider, 4);
  EXPECT_EQ(p.encoder, q.encoder);
  EXPECT_EQ(p.main_head, q.main_head);
}

TEST(Mlp, RejectsShapeMismatch) {
  const auto params = init_params(MlpShape{3, 4, 1, 2, 2}, 1);
  EXPECT_THROW(forward(params, Matrix(2, 4)), ConfigError);
}

TEST(Adam, SingleStepMovesByLearningRate) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState state(cfg, {1});
  std::vector<double> theta{0.0};
  const std::vector<double> grad{1.0};
  state.step({std::span<double>(theta)}, {std::span<const double>(grad)});
  // m_hat = 1, v_hat = 1: update = -lr / (1 + eps)
  EXPECT_NEAR(theta[0], -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientWithoutDecayIsIdentity) {
  AdamState state(AdamConfig{}, {3});
  std::vector<double> theta{1.0, -2.0, 3.0};
  const std::vector<double> grad{0.0, 0.0, 0.0};
  state.step({std::span<double>(theta)}, {std::span<const double>(grad)});
  EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, DecoupledDecayShrinksExactly) {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.5;
  AdamState state(cfg, {2});
  std::vector<double> theta{2.0, -4.0};
  const std::vector<double> grad{0.0, 0.0};
  state.step({std::span<double>(theta)}, {std::span<const double>(grad)});
  EXPECT_DOUBLE_EQ(theta[0], 2.0 - 0.01 * 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(theta[1], -4.0 - 0.01 * 0.5 * -4.0);
}

TEST(Adam, NonFiniteGradientLeavesParameters) {
  AdamState state(AdamConfig{}, {2});
  std::vector<double> theta{1.0, 2.0};
  const std::vector<double> grad{0.5, NAN};
  EXPECT_THROW(state.step({std::span<double>(theta)}, {std::span<const double>(grad)}),
               NumericalError);
  EXPECT_EQ(theta, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(state.steps(), 0u);
}

}  // namespace
