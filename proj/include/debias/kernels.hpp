#pragma once

// Dense kernels behind the MLP. Every kernel has a straight serial reference
// and an OpenMP version; both accumulate each output element in the same
// order, so their results are bitwise identical. The unqualified entry points
// dispatch to the OpenMP path for large enough problems.

#include <cstddef>
#include <span>

#include "debias/matrix.hpp"

namespace debias::kernels {

// out = x * w^T + bias   (x: n x in, w: out x in, out: n x out)
// dw  = dy^T * x, db = column sums of dy
// dx  = dy * w

namespace serial {
void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx);
}  // namespace serial

namespace parallel {
void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx);
}  // namespace parallel

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out);
void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx);

// True when the library was compiled with OpenMP.
bool openmp_enabled();

// Multiply-add count below which the dispatchers stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

}  // namespace debias::kernels
