#include "objsoup/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#include <cmath>
#endif

namespace objsoup::kernels {

#if defined(__aarch64__)
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  const float64x2_t acc = vaddq_f64(acc0, acc1);
  double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

// vmulq + vaddq rather than vfmaq so results match the scalar reference.
void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_neon(double alpha, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), va));
  for (; i < n; ++i) y[i] *= alpha;
}

bool all_finite_neon(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

constexpr KernelTable kNeon{Backend::Neon, dot_neon, axpy_neon, scale_neon, all_finite_neon};

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

#else

const KernelTable* neon_table() { return nullptr; }

#endif

}  // namespace objsoup::kernels
