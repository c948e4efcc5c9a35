#pragma once

#include <vector>

#include "f2/tensor.hpp"

namespace f2 {

struct CooEntry {
  int row;
  int col;
  double val;
};

// Square sparse matrix. The public contract is sorted, deduplicated COO
// (row-major, then column); a CSR view is built once at construction and
// used by the spmm kernels.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  // Entries may arrive unsorted and with duplicates; duplicates are summed.
  SparseMatrix(int n, std::vector<CooEntry> entries);

  int n() const { return n_; }
  std::size_t nnz() const { return vals_.size(); }

  const std::vector<CooEntry>& coo() const { return coo_; }
  const std::vector<int>& rowptr() const { return rowptr_; }
  const std::vector<int>& colidx() const { return colidx_; }
  const std::vector<double>& vals() const { return vals_; }

  DenseTensor densify() const;

  bool is_symmetric(double tol = 0.0) const;

  // Row sums (n x 1).
  DenseTensor row_sums() const;

 private:
  int n_ = 0;
  std::vector<CooEntry> coo_;
  std::vector<int> rowptr_;
  std::vector<int> colidx_;
  std::vector<double> vals_;
};

// out = A * x (dense). x.rows() must equal A.n().
DenseTensor spmm(const SparseMatrix& a, const DenseTensor& x);
// out = A^T * x.
DenseTensor spmm_t(const SparseMatrix& a, const DenseTensor& x);

}  // namespace f2
