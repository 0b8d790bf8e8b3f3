#include "objsoup/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define OBJSOUP_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#include <cmath>
#endif

namespace objsoup::kernels {

#if defined(OBJSOUP_HAVE_AVX2_KERNELS)
namespace {

// Four independent accumulators, 16 doubles per trip. The final reduction
// order is fixed: ((acc0 + acc1) + (acc2 + acc3)), lanes (0+1)+(2+3), then tail.
__attribute__((target("avx2"))) double dot_avx2(const double* a, const double* b,
                                                 std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
    acc2 = _mm256_add_pd(acc2,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8)));
    acc3 = _mm256_add_pd(
        acc3, _mm256_mul_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  const __m256d acc = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double sum = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

__attribute__((target("avx2"))) void axpy_avx2(double alpha, const double* x, double* y,
                                                std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

__attribute__((target("avx2"))) void scale_avx2(double alpha, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  for (; i < n; ++i) y[i] *= alpha;
}

// x - x is 0 for finite x and NaN for +-Inf/NaN.
__attribute__((target("avx2"))) bool all_finite_avx2(const double* x, std::size_t n) {
  __m256d bad = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(_mm256_sub_pd(v, v), _mm256_sub_pd(v, v), _CMP_UNORD_Q));
  }
  if (_mm256_movemask_pd(bad) != 0) return false;
  for (; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

constexpr KernelTable kAvx2{Backend::Avx2, dot_avx2, axpy_avx2, scale_avx2, all_finite_avx2};

}  // namespace

const KernelTable* avx2_table() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace objsoup::kernels
