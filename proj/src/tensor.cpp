#include "f2/tensor.hpp"

#include <cmath>
#include <cstdio>

#include "f2/errors.hpp"
#include "f2/kernels.hpp"

namespace f2 {

DenseTensor::DenseTensor(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0)
    throw DimensionError("tensor dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

DenseTensor DenseTensor::full(int rows, int cols, double v) {
  DenseTensor t(rows, cols);
  t.fill(v);
  return t;
}

DenseTensor DenseTensor::identity(int n) {
  DenseTensor t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

DenseTensor DenseTensor::scalar(double v) {
  DenseTensor t(1, 1);
  t.at(0, 0) = v;
  return t;
}

DenseTensor DenseTensor::from_rows(const std::vector<std::vector<double>>& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  DenseTensor t(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[i].size()) != c)
      throw DimensionError("ragged row " + std::to_string(i) + " in tensor literal");
    for (int j = 0; j < c; ++j) {
      if (!std::isfinite(rows[i][j]))
        throw DimensionError("non-finite entry at (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
      t.at(i, j) = rows[i][j];
    }
  }
  return t;
}

DenseTensor DenseTensor::glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  return uniform(rows, cols, -limit, limit, rng);
}

DenseTensor DenseTensor::uniform(int rows, int cols, double lo, double hi, Rng& rng) {
  DenseTensor t(rows, cols);
  for (auto& v : t.data_) v = rng.uniform(lo, hi);
  return t;
}

double DenseTensor::item() const {
  if (rows_ != 1 || cols_ != 1)
    throw DimensionError("item() requires a 1x1 tensor, got " + shape_str());
  return data_[0];
}

std::string DenseTensor::shape_str() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "(%d,%d)", rows_, cols_);
  return buf;
}

void DenseTensor::fill(double v) {
  for (auto& x : data_) x = v;
}

bool DenseTensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

DenseTensor DenseTensor::add(const DenseTensor& o) const {
  if (!same_shape(o))
    throw DimensionError("add shape mismatch " + shape_str() + " vs " + o.shape_str());
  DenseTensor out(rows_, cols_);
  kernels::K().add(data(), o.data(), out.data(), size());
  return out;
}

DenseTensor DenseTensor::sub(const DenseTensor& o) const {
  if (!same_shape(o))
    throw DimensionError("sub shape mismatch " + shape_str() + " vs " + o.shape_str());
  DenseTensor out(rows_, cols_);
  kernels::K().sub(data(), o.data(), out.data(), size());
  return out;
}

DenseTensor DenseTensor::mul(const DenseTensor& o) const {
  if (!same_shape(o))
    throw DimensionError("mul shape mismatch " + shape_str() + " vs " + o.shape_str());
  DenseTensor out(rows_, cols_);
  kernels::K().mul(data(), o.data(), out.data(), size());
  return out;
}

DenseTensor DenseTensor::scaled(double a) const {
  DenseTensor out(rows_, cols_);
  kernels::K().scale(data(), a, out.data(), size());
  return out;
}

DenseTensor DenseTensor::transposed() const {
  DenseTensor out(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) out.at(j, i) = at(i, j);
  return out;
}

double DenseTensor::max_abs_diff(const DenseTensor& o) const {
  if (!same_shape(o))
    throw DimensionError("diff shape mismatch " + shape_str() + " vs " + o.shape_str());
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double d = std::fabs(data_[i] - o.data_[i]);
    if (d > m) m = d;
  }
  return m;
}

DenseTensor matmul(const DenseTensor& a, const DenseTensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul inner dimension mismatch " + a.shape_str() +
                         " x " + b.shape_str());
  DenseTensor c(a.rows(), b.cols());
  kernels::K().gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

}  // namespace f2
