#include "ffep/simd.hpp"

namespace ffep::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_squared_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i] * x[i];
}

void gemv_rows_scalar(const double* rows, std::size_t n_rows, std::size_t stride,
                      const double* v, std::size_t n, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_scalar(rows + r * stride, v, n);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar, &dot_scalar, &axpy_scalar, &axpy_squared_scalar,
                                 &gemv_rows_scalar};
  return table;
}

}  // namespace ffep::simd
