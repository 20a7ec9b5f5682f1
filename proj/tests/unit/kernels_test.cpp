#include <gtest/gtest.h>

#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "debias/kernels.hpp"
#include "debias/significance.hpp"

namespace {

using debias::Matrix;
namespace k = debias::kernels;

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> d;
  Matrix m(r, c);
  for (double& v : m.values()) v = d(rng);
  return m;
}

class KernelTest : public ::testing::Test {
 protected:
  void SetUp() override {
#ifdef _OPENMP
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
#endif
  }
  void TearDown() override {
#ifdef _OPENMP
    omp_set_num_threads(saved_);
#endif
  }
  int saved_ = 1;
};

TEST_F(KernelTest, AffineMatchesNaiveProduct) {
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(rng, 7, 5), w = random_matrix(rng, 3, 5);
  const std::vector<double> b{0.5, -1.0, 2.0};
  Matrix out;
  k::serial::affine(x, w, b, out);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = b[j];
      for (std::size_t q = 0; q < 5; ++q) s += x(i, q) * w(j, q);
      EXPECT_NEAR(out(i, j), s, 1e-12);
    }
  }
}

TEST_F(KernelTest, GradientsMatchNaiveProducts) {
  std::mt19937_64 rng(4);
  const Matrix dy = random_matrix(rng, 6, 3), x = random_matrix(rng, 6, 4),
               w = random_matrix(rng, 3, 4);
  Matrix dw(3, 4), dx;
  std::vector<double> db(3);
  k::serial::weight_grad(dy, x, dw, db);
  k::serial::input_grad(dy, w, dx);
  for (std::size_t j = 0; j < 3; ++j) {
    double bs = 0;
    for (std::size_t i = 0; i < 6; ++i) bs += dy(i, j);
    EXPECT_NEAR(db[j], bs, 1e-12);
    for (std::size_t q = 0; q < 4; ++q) {
      double s = 0;
      for (std::size_t i = 0; i < 6; ++i) s += dy(i, j) * x(i, q);
      EXPECT_NEAR(dw(j, q), s, 1e-12);
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t q = 0; q < 4; ++q) {
      double s = 0;
      for (std::size_t j = 0; j < 3; ++j) s += dy(i, j) * w(j, q);
      EXPECT_NEAR(dx(i, q), s, 1e-12);
    }
  }
}

TEST_F(KernelTest, SerialAndParallelAreBitwiseEqual) {
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(rng, 513, 37), w = random_matrix(rng, 29, 37),
               dy = random_matrix(rng, 513, 29);
  std::vector<double> b(29, 0.25);
  Matrix o1, o2, dw1(29, 37), dw2(29, 37), dx1, dx2;
  std::vector<double> db1(29), db2(29);
  k::serial::affine(x, w, b, o1);
  k::parallel::affine(x, w, b, o2);
  EXPECT_EQ(o1, o2);
  k::serial::weight_grad(dy, x, dw1, db1);
  k::parallel::weight_grad(dy, x, dw2, db2);
  EXPECT_EQ(dw1, dw2);
  EXPECT_EQ(db1, db2);
  k::serial::input_grad(dy, w, dx1);
  k::parallel::input_grad(dy, w, dx2);
  EXPECT_EQ(dx1, dx2);
}

TEST_F(KernelTest, PermutationKernelsAgree) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d;
  std::vector<double> pooled(16);
  for (double& v : pooled) v = d(rng);
  const auto se = debias::permutation_kernels::serial::exact(pooled, 8, 0.3);
  const auto pe = debias::permutation_kernels::parallel::exact(pooled, 8, 0.3);
  EXPECT_EQ(se.extreme, pe.extreme);
  EXPECT_EQ(se.total, 12870u);
  EXPECT_EQ(pe.total, 12870u);
  const auto ss = debias::permutation_kernels::serial::sampled(pooled, 8, 0.3, 5000, 11);
  const auto ps = debias::permutation_kernels::parallel::sampled(pooled, 8, 0.3, 5000, 11);
  EXPECT_EQ(ss.extreme, ps.extreme);
  EXPECT_EQ(ss.total, ps.total);
}

}  // namespace
