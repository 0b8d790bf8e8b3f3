#pragma once

// Dense double-precision vector kernels used by every inner product, axpy and
// Gram entry in the library. A scalar reference implementation is always
// present; AVX2 (x86-64) and NEON (aarch64) variants are picked at runtime.
//
// Reduction order is fixed per backend, so results are reproducible for a
// given backend. axpy/scale are bit-identical across backends; dot differs
// only by reassociation of the sum.

#include <cstddef>
#include <span>
#include <string_view>

namespace objsoup::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y *= alpha
  void (*scale)(double alpha, double* y, std::size_t n);
  // true iff every entry is finite
  bool (*all_finite)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool backend_available(Backend b);
std::string_view backend_name(Backend b);
// Throws std::invalid_argument for unknown names.
Backend parse_backend(std::string_view name);

// The best available backend, unless OBJSOUP_KERNEL=scalar|avx2|neon overrides.
Backend detect_backend();

Backend active_backend();
// Process-wide switch intended for tests and benchmarks. Throws if the
// backend is unavailable on this machine.
void select_backend(Backend b);
const KernelTable& active();

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> y);
bool all_finite(std::span<const double> x);

}  // namespace objsoup::kernels
