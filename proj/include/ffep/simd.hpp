#pragma once

// Dense inner-loop kernels used by the factor evaluations. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2 variant. The
// variant is chosen once at runtime (CPU detection, overridable through the
// FFEP_SIMD environment variable or set_active_isa) and stays fixed for the
// life of the process so that runs are reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace ffep::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] += alpha * x[i] * x[i]
  void (*axpy_squared)(double alpha, const double* x, double* y, std::size_t n);
  // out[r] = dot(rows + r * stride, v, n) for r < n_rows
  void (*gemv_rows)(const double* rows, std::size_t n_rows, std::size_t stride,
                    const double* v, std::size_t n, double* out);
};

const KernelTable& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
// Defined only when the library was built with AVX2 support.
const KernelTable* avx2_kernels();
#endif

bool cpu_supports(Isa isa);
// True when the CPU supports the ISA and this build has kernels for it.
bool isa_available(Isa isa);
Isa detect_isa();

const KernelTable& kernels_for(Isa isa);
const KernelTable& active();
// Returns false (and leaves the selection unchanged) if the ISA is not
// available on this CPU or in this build.
bool set_active_isa(Isa isa);

std::string_view isa_name(Isa isa);
bool parse_isa(std::string_view name, Isa& out);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void axpy_squared(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_squared(alpha, x.data(), y.data(), x.size());
}

}  // namespace ffep::simd
