#include "f2/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

// AVX2+FMA kernels. Accumulation order along the reduction axis matches the
// scalar reference (ascending), so differences are limited to FMA contraction
// and, for dot/vsum, four partial accumulators.

namespace f2::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// crow[0..n) += av * brow[0..n)
inline void fma_row(const double av, const double* brow, double* crow, int n) {
  const __m256d a = _mm256_set1_pd(av);
  int j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_loadu_pd(crow + j);
    __m256d c1 = _mm256_loadu_pd(crow + j + 4);
    __m256d c2 = _mm256_loadu_pd(crow + j + 8);
    __m256d c3 = _mm256_loadu_pd(crow + j + 12);
    c0 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j), c0);
    c1 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 4), c1);
    c2 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 8), c2);
    c3 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 12), c3);
    _mm256_storeu_pd(crow + j, c0);
    _mm256_storeu_pd(crow + j + 4, c1);
    _mm256_storeu_pd(crow + j + 8, c2);
    _mm256_storeu_pd(crow + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c = _mm256_loadu_pd(crow + j);
    c = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j), c);
    _mm256_storeu_pd(crow + j, c);
  }
  for (; j < n; ++j) crow[j] += av * brow[j];
}

void v_gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      fma_row(av, b + static_cast<std::size_t>(p) * n, crow, n);
    }
  }
}

void v_gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      int p = 0;
      for (; p + 8 <= k; p += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p + 4), _mm256_loadu_pd(brow + p + 4), acc1);
      }
      for (; p + 4 <= k; p += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc0);
      double acc = hsum(_mm256_add_pd(acc0, acc1));
      for (; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void v_gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      fma_row(av, brow, c + static_cast<std::size_t>(i) * n, n);
    }
  }
}

void v_add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void v_sub(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void v_mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void v_vmax(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = x[i] >= y[i] ? x[i] : y[i];
}

void v_scale(const double* x, double a, double* out, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double v_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double v_vsum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

void v_relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd(const double* x, const double* g, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gv));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) out[i] += g[i];
}

void v_lrelu(const double* x, double slope, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sl = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(sl, xv), xv, mask));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void v_lrelu_bwd(const double* x, const double* g, double slope, double* out,
                 std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sl = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    const __m256d upd = _mm256_blendv_pd(_mm256_mul_pd(sl, gv), gv, mask);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), upd));
  }
  for (; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : slope * g[i];
}

void v_max_select_bwd(const double* x, const double* y, const double* g,
                      double* gx, double* gy, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), _CMP_GE_OQ);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d gxv = _mm256_and_pd(mask, gv);
    const __m256d gyv = _mm256_andnot_pd(mask, gv);
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), gxv));
    _mm256_storeu_pd(gy + i, _mm256_add_pd(_mm256_loadu_pd(gy + i), gyv));
  }
  for (; i < n; ++i) {
    if (x[i] >= y[i]) {
      gx[i] += g[i];
    } else {
      gy[i] += g[i];
    }
  }
}

void v_spmm_csr(const int* rowptr, const int* colidx, const double* vals,
                int nrows, const double* x, int cols, double* out) {
  for (int r = 0; r < nrows; ++r) {
    double* orow = out + static_cast<std::size_t>(r) * cols;
    for (int e = rowptr[r]; e < rowptr[r + 1]; ++e)
      fma_row(vals[e], x + static_cast<std::size_t>(colidx[e]) * cols, orow, cols);
  }
}

void v_spmm_csr_t(const int* rowptr, const int* colidx, const double* vals,
                  int nrows, const double* x, int cols, double* out) {
  for (int r = 0; r < nrows; ++r) {
    const double* xrow = x + static_cast<std::size_t>(r) * cols;
    for (int e = rowptr[r]; e < rowptr[r + 1]; ++e)
      fma_row(vals[e], xrow, out + static_cast<std::size_t>(colidx[e]) * cols, cols);
  }
}

const Dispatch kAvx2 = {
    v_gemm_nn, v_gemm_nt, v_gemm_tn,
    v_add, v_sub, v_mul, v_vmax, v_scale, v_axpy,
    v_dot, v_vsum,
    v_relu, v_relu_bwd, v_lrelu, v_lrelu_bwd, v_max_select_bwd,
    v_spmm_csr, v_spmm_csr_t,
};

}  // namespace

const Dispatch* avx2_table_impl() { return &kAvx2; }

}  // namespace f2::kernels

#endif  // __AVX2__ && __FMA__
