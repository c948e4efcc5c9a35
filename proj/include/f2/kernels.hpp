#pragma once

#include <cstddef>

namespace f2::kernels {

// Low-level numeric kernels behind a runtime-selected dispatch table.
//
// Two implementations exist for every entry: a scalar reference (the
// semantic ground truth) and an AVX2+FMA variant compiled into its own
// translation unit. At startup the table resolves to the fastest variant
// the CPU supports; the F2_KERNELS environment variable ("scalar" or
// "avx2") forces a choice, which the equivalence tests use to compare the
// two implementations against each other.
//
// Conventions:
//  - All matrices are row-major, double precision.
//  - gemm_* accumulate (C += ...); callers zero the output first.
//  - Per-element accumulation order along the reduction axis is ascending
//    in every variant, so scalar and AVX2 results differ only by FMA /
//    partial-sum rounding (bounded by the equivalence tests).
struct Dispatch {
  // C(m x n) += A(m x k) * B(k x n)
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n);
  // C(m x n) += A(m x k) * B(n x k)^T
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n);
  // C(m x n) += A(k x m)^T * B(k x n)
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n);

  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*vmax)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(const double* x, double a, double* out, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x

  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*vsum)(const double* x, std::size_t n);

  void (*relu)(const double* x, double* out, std::size_t n);
  // out += g where x > 0 (derivative at 0 is 0)
  void (*relu_bwd)(const double* x, const double* g, double* out, std::size_t n);
  void (*lrelu)(const double* x, double slope, double* out, std::size_t n);
  void (*lrelu_bwd)(const double* x, const double* g, double slope, double* out, std::size_t n);
  // Backward of elementwise max: ties go to x.
  // gx += g where x >= y, gy += g where x < y.
  void (*max_select_bwd)(const double* x, const double* y, const double* g,
                         double* gx, double* gy, std::size_t n);

  // OUT(nr x c) += A * X for CSR A (nr rows), X (? x c).
  void (*spmm_csr)(const int* rowptr, const int* colidx, const double* vals,
                   int nrows, const double* x, int cols, double* out);
  // OUT += A^T * X; scatter form, OUT has as many rows as A has columns.
  void (*spmm_csr_t)(const int* rowptr, const int* colidx, const double* vals,
                     int nrows, const double* x, int cols, double* out);
};

// The active table. Resolved once on first use.
const Dispatch& K();

// Name of the active variant: "scalar" or "avx2".
const char* active_variant();

// Tables for each variant (avx2() is null when unsupported by the build
// or the CPU). Exposed for the equivalence tests.
const Dispatch* scalar_table();
const Dispatch* avx2_table();

}  // namespace f2::kernels
