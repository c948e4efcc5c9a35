#include "f2/kernels.hpp"

// Scalar reference kernels. These define the semantics; the AVX2 variants
// must agree with them within rounding (see tests/test_kernels.cpp).

namespace f2::kernels {
namespace {

void s_gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

void s_gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void s_sub(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void s_mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void s_vmax(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] >= y[i] ? x[i] : y[i];
}

void s_scale(const double* x, double a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double s_vsum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void s_relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_bwd(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) out[i] += g[i];
}

void s_lrelu(const double* x, double slope, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void s_lrelu_bwd(const double* x, const double* g, double slope, double* out,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : slope * g[i];
}

void s_max_select_bwd(const double* x, const double* y, const double* g,
                      double* gx, double* gy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] >= y[i]) {
      gx[i] += g[i];
    } else {
      gy[i] += g[i];
    }
  }
}

void s_spmm_csr(const int* rowptr, const int* colidx, const double* vals,
                int nrows, const double* x, int cols, double* out) {
  for (int r = 0; r < nrows; ++r) {
    double* orow = out + static_cast<std::size_t>(r) * cols;
    for (int e = rowptr[r]; e < rowptr[r + 1]; ++e) {
      const double v = vals[e];
      const double* xrow = x + static_cast<std::size_t>(colidx[e]) * cols;
      for (int j = 0; j < cols; ++j) orow[j] += v * xrow[j];
    }
  }
}

void s_spmm_csr_t(const int* rowptr, const int* colidx, const double* vals,
                  int nrows, const double* x, int cols, double* out) {
  for (int r = 0; r < nrows; ++r) {
    const double* xrow = x + static_cast<std::size_t>(r) * cols;
    for (int e = rowptr[r]; e < rowptr[r + 1]; ++e) {
      const double v = vals[e];
      double* orow = out + static_cast<std::size_t>(colidx[e]) * cols;
      for (int j = 0; j < cols; ++j) orow[j] += v * xrow[j];
    }
  }
}

const Dispatch kScalar = {
    s_gemm_nn, s_gemm_nt, s_gemm_tn,
    s_add, s_sub, s_mul, s_vmax, s_scale, s_axpy,
    s_dot, s_vsum,
    s_relu, s_relu_bwd, s_lrelu, s_lrelu_bwd, s_max_select_bwd,
    s_spmm_csr, s_spmm_csr_t,
};

}  // namespace

const Dispatch* scalar_table() { return &kScalar; }

}  // namespace f2::kernels
