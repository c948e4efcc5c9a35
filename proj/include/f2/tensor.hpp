#pragma once

#include <string>
#include <vector>

#include "f2/rng.hpp"

namespace f2 {

// Dense row-major matrix of doubles. The only rank used anywhere is 2;
// scalars are 1x1 and row vectors 1xN. Entries coming from files or user
// code are validated finite at construction helpers (`from_rows`, the
// dataset loaders); internal ops trust their inputs and the training loops
// re-check the loss every step.
class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(int rows, int cols);  // zero-filled

  static DenseTensor zeros(int rows, int cols) { return {rows, cols}; }
  static DenseTensor full(int rows, int cols, double v);
  static DenseTensor identity(int n);
  static DenseTensor scalar(double v);
  // Validates shape consistency and finiteness.
  static DenseTensor from_rows(const std::vector<std::vector<double>>& rows);
  // Glorot-uniform init: limit sqrt(6 / (fan_in + fan_out)), fan = rows/cols.
  static DenseTensor glorot(int rows, int cols, Rng& rng);
  static DenseTensor uniform(int rows, int cols, double lo, double hi, Rng& rng);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double item() const;  // value of a 1x1 tensor

  bool same_shape(const DenseTensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const;

  void fill(double v);
  bool all_finite() const;

  // Elementwise helpers over the kernel layer (out-of-place).
  DenseTensor add(const DenseTensor& o) const;
  DenseTensor sub(const DenseTensor& o) const;
  DenseTensor mul(const DenseTensor& o) const;
  DenseTensor scaled(double a) const;
  DenseTensor transposed() const;

  double max_abs_diff(const DenseTensor& o) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// C = A * B through the dispatched gemm.
DenseTensor matmul(const DenseTensor& a, const DenseTensor& b);

}  // namespace f2
