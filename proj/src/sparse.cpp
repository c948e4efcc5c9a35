#include "f2/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "f2/errors.hpp"
#include "f2/kernels.hpp"

namespace f2 {

SparseMatrix::SparseMatrix(int n, std::vector<CooEntry> entries) : n_(n) {
  if (n < 0) throw DimensionError("sparse matrix size must be non-negative");
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
      throw DimensionError("sparse entry (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") outside " +
                           std::to_string(n) + "x" + std::to_string(n));
    if (!std::isfinite(e.val))
      throw DimensionError("non-finite sparse entry at (" + std::to_string(e.row) +
                           "," + std::to_string(e.col) + ")");
  }
  std::sort(entries.begin(), entries.end(), [](const CooEntry& a, const CooEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  coo_.reserve(entries.size());
  for (const auto& e : entries) {
    if (!coo_.empty() && coo_.back().row == e.row && coo_.back().col == e.col) {
      coo_.back().val += e.val;
    } else {
      coo_.push_back(e);
    }
  }
  rowptr_.assign(n_ + 1, 0);
  colidx_.reserve(coo_.size());
  vals_.reserve(coo_.size());
  for (const auto& e : coo_) {
    ++rowptr_[e.row + 1];
    colidx_.push_back(e.col);
    vals_.push_back(e.val);
  }
  for (int r = 0; r < n_; ++r) rowptr_[r + 1] += rowptr_[r];
}

DenseTensor SparseMatrix::densify() const {
  DenseTensor d(n_, n_);
  for (const auto& e : coo_) d.at(e.row, e.col) = e.val;
  return d;
}

bool SparseMatrix::is_symmetric(double tol) const {
  for (const auto& e : coo_) {
    // binary search for (col,row)
    const int r = e.col;
    const int lo = rowptr_[r], hi = rowptr_[r + 1];
    const auto it = std::lower_bound(colidx_.begin() + lo, colidx_.begin() + hi, e.row);
    if (it == colidx_.begin() + hi || *it != e.row) return false;
    const double other = vals_[static_cast<std::size_t>(it - colidx_.begin())];
    if (std::fabs(other - e.val) > tol) return false;
  }
  return true;
}

DenseTensor SparseMatrix::row_sums() const {
  DenseTensor s(n_, 1);
  for (const auto& e : coo_) s.at(e.row, 0) += e.val;
  return s;
}

DenseTensor spmm(const SparseMatrix& a, const DenseTensor& x) {
  if (x.rows() != a.n())
    throw DimensionError("spmm shape mismatch: A is " + std::to_string(a.n()) +
                         "x" + std::to_string(a.n()) + ", x is " + x.shape_str());
  DenseTensor out(a.n(), x.cols());
  kernels::K().spmm_csr(a.rowptr().data(), a.colidx().data(), a.vals().data(),
                        a.n(), x.data(), x.cols(), out.data());
  return out;
}

DenseTensor spmm_t(const SparseMatrix& a, const DenseTensor& x) {
  if (x.rows() != a.n())
    throw DimensionError("spmm_t shape mismatch: A is " + std::to_string(a.n()) +
                         "x" + std::to_string(a.n()) + ", x is " + x.shape_str());
  DenseTensor out(a.n(), x.cols());
  kernels::K().spmm_csr_t(a.rowptr().data(), a.colidx().data(), a.vals().data(),
                          a.n(), x.data(), x.cols(), out.data());
  return out;
}

}  // namespace f2
