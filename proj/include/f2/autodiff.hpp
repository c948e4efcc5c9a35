#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "f2/rng.hpp"
#include "f2/sparse.hpp"
#include "f2/tensor.hpp"

namespace f2 {

class Tape;

// Handle into a Tape. Cheap to copy; valid for the tape's lifetime.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const DenseTensor& tensor() const;
  int rows() const { return tensor().rows(); }
  int cols() const { return tensor().cols(); }
};

// Neighbor structure for attention aggregation: row u lists N(u) plus u
// itself, ascending.
struct GatStructure {
  int n = 0;
  std::vector<int> ptr;
  std::vector<int> idx;
};

// Define-by-run reverse-mode tape. A fresh tape is built for every forward
// pass; node ids are creation-ordered, which makes reverse id order a valid
// topological order for backward. Gradients of nodes a loss never reaches
// stay exactly zero.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant leaf.
  Value leaf(DenseTensor t);
  // Leaf bound to a persistent parameter tensor; repeated calls with the
  // same slot return the same node. The slot's current value is copied in.
  Value param(DenseTensor* slot);

  // Runs backward from a 1x1 loss node.
  void backward(Value loss);

  // Gradient of any node (zeros if backward never reached it).
  DenseTensor grad_of(Value v) const;
  // Gradient for a bound parameter slot (zeros if unbound or unreached).
  DenseTensor grad_for(const DenseTensor* slot) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  friend struct Value;
  friend class TapeOps;

  // `back` receives the tape and this node's accumulated gradient.
  struct Node {
    DenseTensor val;
    DenseTensor grad;  // empty until first accumulation
    std::function<void(Tape&, const DenseTensor&)> back;
  };

  Value push(DenseTensor val, std::function<void(Tape&, const DenseTensor&)> back);
  // For ops whose backward needs the output node's own id.
  void set_back(int id, std::function<void(Tape&, const DenseTensor&)> back);
  DenseTensor& ensure_grad(int id);
  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }
  const DenseTensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  const DenseTensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const DenseTensor*, int> bound_;
};

// ---- ops -------------------------------------------------------------

Value matmul(Value a, Value b);
Value spmm(const SparseMatrix& a, Value x);  // a must outlive the tape

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value vmax(Value a, Value b);          // elementwise max, ties favor a
Value scale(Value a, double c);
Value scale_by(Value a, Value s);      // s is 1x1
Value add_scalar(Value a, Value s);    // s is 1x1, broadcast
Value add_bias(Value a, Value bias);   // bias is 1 x cols, broadcast over rows
Value row_scale(Value a, Value s);     // s is rows x 1, scales each row
Value max_scalar(Value a, double c);   // elementwise max with constant

Value relu(Value a);
Value elu(Value a);                    // alpha = 1
Value lrelu(Value a, double slope);
Value sigmoid(Value a);
Value vtanh(Value a);
Value vexp(Value a);
Value vlog(Value a);                   // requires positive entries
Value vrecip(Value a);                 // requires nonzero entries

Value concat_cols(const std::vector<Value>& xs);
Value slice_cols(Value a, int c0, int c1);  // [c0, c1)
Value cell(Value a, int r, int c);          // 1x1 view of one entry

Value softmax_rows(Value a);
Value sum_all(Value a);

// Mean negative log likelihood of `labels` at rows `mask` (must be
// non-empty). Returns 1x1.
Value cross_entropy(Value logits, const std::vector<int>& labels,
                    const std::vector<int>& mask);

// Inverted dropout; sampling happens at node creation from `rng`.
// p == 0 returns `a` unchanged.
Value dropout(Value a, double p, Rng& rng);

// Attention-weighted neighborhood sum:
//   out[u] = sum_{j in nbr(u)} softmax_j(lrelu(p[u] + q[j], slope)) * z[j]
// z: n x d, p and q: n x 1. `st` must outlive the tape.
Value gat_aggregate(Value z, Value p, Value q, const GatStructure& st, double slope);

// List reductions built from the primitives above.
Value reduce_sum(const std::vector<Value>& xs);
Value reduce_mean(const std::vector<Value>& xs);
Value reduce_max(const std::vector<Value>& xs);

}  // namespace f2
