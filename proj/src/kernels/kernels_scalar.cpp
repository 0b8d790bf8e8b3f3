#include <cmath>

#include "objsoup/kernels.hpp"

namespace objsoup::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_scalar(double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

bool all_finite_scalar(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

constexpr KernelTable kScalar{Backend::Scalar, dot_scalar, axpy_scalar, scale_scalar,
                              all_finite_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace objsoup::kernels
