#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "debias/dfl.hpp"
#include "debias/mlp.hpp"
#include "gradcheck.hpp"

namespace {

using namespace debias;

using oracle::flatten;
using oracle::numeric_gradient;
using oracle::relative_error;

oracle::GradInstance make_instance(std::uint64_t seed, std::size_t depth) {
  return oracle::kink_free_instance(seed, depth);
}

TEST(Gradients, WeightedCrossEntropyMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = make_instance(seed, 1 + seed % 3);
    for (bool unit_weights : {false, true}) {
      const std::vector<double> w = unit_weights ? std::vector<double>(5, 1.0) : in.weights;
      const auto cache = forward(in.params, in.x);
      const auto analytic =
          flatten(weighted_cross_entropy_backward(in.params, cache, in.labels, w).tensors());
      const auto numeric = numeric_gradient(in.params, false, [&](const MlpParams& p) {
        return weighted_cross_entropy_loss(forward(p, in.x), in.labels, w);
      });
      EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "seed " << seed;
    }
  }
}

TEST(Gradients, DflWeightedLossMatchesFiniteDifferences) {
  // Weights from the detector are frozen before differentiating.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = make_instance(100 + seed, 2);
    const auto cache = forward(in.params, in.x);
    const auto w = dfl_weights(cache.detector_logits, in.targets, 4.0, 2.0);
    const auto analytic =
        flatten(weighted_cross_entropy_backward(in.params, cache, in.labels, w).tensors());
    const auto numeric = numeric_gradient(in.params, false, [&](const MlpParams& p) {
      return weighted_cross_entropy_loss(forward(p, in.x), in.labels, w);
    });
    EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "seed " << seed;
  }
}

TEST(Gradients, DetectorLossMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = make_instance(200 + seed, 1 + seed % 2);
    for (double t : {1.0, 4.0}) {
      const auto cache = forward(in.params, in.x);
      const auto analytic =
          flatten(detector_backward(in.params, cache, in.targets, t).tensors());
      const auto numeric = numeric_gradient(in.params, true, [&](const MlpParams& p) {
        return detector_loss(forward(p, in.x), in.targets, t);
      });
      EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "seed " << seed << " t " << t;
    }
  }
}

TEST(Gradients, ZeroWeightsGiveZeroGradient) {
  const auto in = make_instance(7, 2);
  const auto cache = forward(in.params, in.x);
  const auto g = flatten(
      weighted_cross_entropy_backward(in.params, cache, in.labels, std::vector<double>(5, 0.0))
          .tensors());
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, DetectorStationaryAtSymmetricLogits) {
  auto in = make_instance(8, 1);
  in.params.detector_head.weight = Matrix(2, 6);
  in.params.detector_head.bias = {0.0, 0.0};
  const std::vector<int> targets{0, 1, 0, 1};
  Matrix x(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x(i, j) = 0.5;  // identical rows
  }
  const auto cache = forward(in.params, x);
  const auto g = flatten(detector_backward(in.params, cache, targets, 1.0).tensors());
  for (double v : g) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Gradients, DetectorLossDoesNotReachEncoder) {
  const auto in = make_instance(9, 2);
  // The detector loss does depend on encoder weights...
  MlpParams moved = in.params;
  moved.encoder[0].weight(0, 0) += 0.5;
  moved.encoder[0].weight(1, 1) -= 0.5;
  const double base = detector_loss(forward(in.params, in.x), in.targets, 1.0);
  EXPECT_NE(base, detector_loss(forward(moved, in.x), in.targets, 1.0));
  // ...but its gradient covers the detector head only.
  const auto grads = detector_backward(in.params, forward(in.params, in.x), in.targets, 1.0);
  EXPECT_EQ(grads.tensors().size(), 2u);
  EXPECT_EQ(grads.tensors()[0].size(), in.params.detector_head.weight.size());
  // Main-loss gradients are unchanged by the detector targets or temperature.
  const auto cache = forward(in.params, in.x);
  const auto w = std::vector<double>(5, 1.0);
  const auto a = flatten(weighted_cross_entropy_backward(in.params, cache, in.labels, w).tensors());
  MlpParams other_detector = in.params;
  for (double& v : other_detector.detector_head.weight.values()) v *= -3.0;
  const auto c2 = forward(other_detector, in.x);
  const auto b =
      flatten(weighted_cross_entropy_backward(other_detector, c2, in.labels, w).tensors());
  EXPECT_EQ(a, b);
}

TEST(Gradients, UnitWeightsEqualPlainCrossEntropy) {
  const auto in = make_instance(10, 1);
  const auto cache = forward(in.params, in.x);
  const auto g = flatten(
      weighted_cross_entropy_backward(in.params, cache, in.labels, std::vector<double>(5, 1.0))
          .tensors());
  const auto numeric = numeric_gradient(in.params, false, [&](const MlpParams& p) {
    const auto c = forward(p, in.x);
    double loss = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      double mx = c.main_logits(i, 0);
      for (std::size_t j = 1; j < 3; ++j) mx = std::max(mx, c.main_logits(i, j));
      double z = 0;
      for (std::size_t j = 0; j < 3; ++j) z += std::exp(c.main_logits(i, j) - mx);
      loss += -(c.main_logits(i, in.labels[i]) - mx - std::log(z));
    }
    return loss / 5.0;
  });
  EXPECT_LT(relative_error(g, numeric), 1e-4);
}

}  // namespace
