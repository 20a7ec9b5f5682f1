#include "debias/kernels.hpp"

#include <string>

#include "debias/errors.hpp"

#ifdef DEBIAS_HAVE_OPENMP
#include <omp.h>
#endif

namespace debias::kernels {

namespace {

void check_affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  if (x.cols() != w.cols()) {
    throw ConfigError("affine: input dim " + std::to_string(x.cols()) +
                      " does not match weight dim " + std::to_string(w.cols()));
  }
  if (bias.size() != w.rows()) throw ConfigError("affine: bias size mismatch");
  if (out.rows() != x.rows() || out.cols() != w.rows()) out.resize(x.rows(), w.rows());
}

void check_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (dy.rows() != x.rows()) throw ConfigError("weight_grad: batch size mismatch");
  if (db.size() != dy.cols()) throw ConfigError("weight_grad: bias gradient size mismatch");
  if (dw.rows() != dy.cols() || dw.cols() != x.cols()) dw.resize(dy.cols(), x.cols());
}

void check_input_grad(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols() != w.rows()) throw ConfigError("input_grad: output dim mismatch");
  if (dx.rows() != dy.rows() || dx.cols() != w.cols()) dx.resize(dy.rows(), w.cols());
}

}  // namespace

namespace serial {

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_affine(x, w, bias, out);
  const std::size_t n = x.rows(), in = x.cols(), outs = w.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < outs; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += x(i, k) * w(o, k);
      out(i, o) = acc + bias[o];
    }
  }
}

void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  check_weight_grad(dy, x, dw, db);
  const std::size_t n = dy.rows(), outs = dy.cols(), in = x.cols();
  for (std::size_t o = 0; o < outs; ++o) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += dy(i, o) * x(i, k);
      dw(o, k) = acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += dy(i, o);
    db[o] = acc;
  }
}

void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx) {
  check_input_grad(dy, w, dx);
  const std::size_t n = dy.rows(), outs = dy.cols(), in = w.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < outs; ++o) acc += dy(i, o) * w(o, k);
      dx(i, k) = acc;
    }
  }
}

}  // namespace serial

namespace parallel {

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  check_affine(x, w, bias, out);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t in = x.cols(), outs = w.rows();
  const double* xp = x.data();
  const double* wp = w.data();
  double* op = out.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* xr = xp + i * in;
    for (std::size_t o = 0; o < outs; ++o) {
      const double* wr = wp + o * in;
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      op[i * outs + o] = acc + bias[o];
    }
  }
}

void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  check_weight_grad(dy, x, dw, db);
  const std::size_t n = dy.rows(), outs = dy.cols(), in = x.cols();
  const std::ptrdiff_t cells = static_cast<std::ptrdiff_t>(outs * (in + 1));
  const double* dyp = dy.data();
  const double* xp = x.data();
  double* dwp = dw.data();
  // Column k == in is the bias column.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
    const std::size_t o = static_cast<std::size_t>(cell) / (in + 1);
    const std::size_t k = static_cast<std::size_t>(cell) % (in + 1);
    double acc = 0.0;
    if (k == in) {
      for (std::size_t i = 0; i < n; ++i) acc += dyp[i * outs + o];
      db[o] = acc;
    } else {
      for (std::size_t i = 0; i < n; ++i) acc += dyp[i * outs + o] * xp[i * in + k];
      dwp[o * in + k] = acc;
    }
  }
}

void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx) {
  check_input_grad(dy, w, dx);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(dy.rows());
  const std::size_t outs = dy.cols(), in = w.cols();
  const double* dyp = dy.data();
  const double* wp = w.data();
  double* dxp = dx.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < outs; ++o) acc += dyp[i * outs + o] * wp[o * in + k];
      dxp[i * in + k] = acc;
    }
  }
}

}  // namespace parallel

bool openmp_enabled() {
#ifdef DEBIAS_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

namespace {
bool use_parallel(std::size_t work) {
#ifdef DEBIAS_HAVE_OPENMP
  // Nested regions (a sweep worker calling into a kernel) stay serial.
  return work >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void affine(const Matrix& x, const Matrix& w, std::span<const double> bias, Matrix& out) {
  if (use_parallel(x.rows() * w.size())) {
    parallel::affine(x, w, bias, out);
  } else {
    serial::affine(x, w, bias, out);
  }
}

void weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (use_parallel(dy.size() * x.cols())) {
    parallel::weight_grad(dy, x, dw, db);
  } else {
    serial::weight_grad(dy, x, dw, db);
  }
}

void input_grad(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (use_parallel(dy.size() * w.cols())) {
    parallel::input_grad(dy, w, dx);
  } else {
    serial::input_grad(dy, w, dx);
  }
}

}  // namespace debias::kernels
