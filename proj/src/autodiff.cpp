#include "f2/autodiff.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "f2/errors.hpp"
#include "f2/kernels.hpp"

namespace f2 {

const DenseTensor& Value::tensor() const { return tape->val(id); }

// Backdoor used by the op implementations below.
class TapeOps {
 public:
  using BackFn = std::function<void(Tape&, const DenseTensor&)>;
  static Value push(Tape& t, DenseTensor v, BackFn b) {
    return t.push(std::move(v), std::move(b));
  }
  static Value push_self(Tape& t, DenseTensor v,
                         std::function<BackFn(int self)> make) {
    Value out = t.push(std::move(v), nullptr);
    t.set_back(out.id, make(out.id));
    return out;
  }
  static const DenseTensor& val(const Tape& t, int id) { return t.val(id); }
  static DenseTensor& grad(Tape& t, int id) { return t.ensure_grad(id); }
};

namespace {

using kernels::K;

void check_same_tape(Value a, Value b, const char* op) {
  if (a.tape != b.tape)
    throw UsageError(std::string(op) + ": operands live on different tapes");
}

void check_same_shape(Value a, Value b, const char* op) {
  if (!a.tensor().same_shape(b.tensor()))
    throw DimensionError(std::string(op) + " shape mismatch " +
                         a.tensor().shape_str() + " vs " + b.tensor().shape_str());
}

void check_scalar(Value s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1)
    throw DimensionError(std::string(op) + " expects a 1x1 tensor, got " +
                         s.tensor().shape_str());
}

// dst += src, shapes already matching.
void accum(DenseTensor& dst, const DenseTensor& src) {
  K().axpy(1.0, src.data(), dst.data(), dst.size());
}

}  // namespace

Value Tape::push(DenseTensor val, std::function<void(Tape&, const DenseTensor&)> back) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(val), DenseTensor{}, std::move(back)});
  return Value{this, id};
}

void Tape::set_back(int id, std::function<void(Tape&, const DenseTensor&)> back) {
  nodes_[static_cast<std::size_t>(id)].back = std::move(back);
}

DenseTensor& Tape::ensure_grad(int id) {
  Node& nd = nodes_[static_cast<std::size_t>(id)];
  if (nd.grad.empty()) nd.grad = DenseTensor(nd.val.rows(), nd.val.cols());
  return nd.grad;
}

Value Tape::leaf(DenseTensor t) { return push(std::move(t), nullptr); }

Value Tape::param(DenseTensor* slot) {
  auto it = bound_.find(slot);
  if (it != bound_.end()) return Value{this, it->second};
  Value v = push(*slot, nullptr);
  bound_.emplace(slot, v.id);
  return v;
}

void Tape::backward(Value loss) {
  if (loss.tape != this) throw UsageError("backward: loss from another tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw DimensionError("backward expects a 1x1 loss, got " +
                         loss.tensor().shape_str());
  ensure_grad(loss.id).at(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& nd = nodes_[static_cast<std::size_t>(id)];
    if (nd.grad.empty() || !nd.back) continue;
    nd.back(*this, nd.grad);
  }
}

DenseTensor Tape::grad_of(Value v) const {
  if (v.tape != this) throw UsageError("grad_of: value from another tape");
  const Node& nd = nodes_[static_cast<std::size_t>(v.id)];
  if (nd.grad.empty()) return DenseTensor(nd.val.rows(), nd.val.cols());
  return nd.grad;
}

DenseTensor Tape::grad_for(const DenseTensor* slot) const {
  auto it = bound_.find(slot);
  if (it == bound_.end()) return DenseTensor(slot->rows(), slot->cols());
  return grad_of(Value{const_cast<Tape*>(this), it->second});
}

// ---- matrix products ----------------------------------------------------

Value matmul(Value a, Value b) {
  check_same_tape(a, b, "matmul");
  const DenseTensor& av = a.tensor();
  const DenseTensor& bv = b.tensor();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul inner dimension mismatch " + av.shape_str() +
                         " x " + bv.shape_str());
  DenseTensor out(av.rows(), bv.cols());
  K().gemm_nn(av.data(), bv.data(), out.data(), av.rows(), av.cols(), bv.cols());
  const int ia = a.id, ib = b.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    const DenseTensor& B = TapeOps::val(t, ib);
    DenseTensor& ga = TapeOps::grad(t, ia);
    DenseTensor& gb = TapeOps::grad(t, ib);
    // ga += g * B^T, gb += A^T * g
    K().gemm_nt(g.data(), B.data(), ga.data(), g.rows(), g.cols(), B.rows());
    K().gemm_tn(A.data(), g.data(), gb.data(), A.cols(), A.rows(), g.cols());
  });
}

Value spmm(const SparseMatrix& a, Value x) {
  const DenseTensor& xv = x.tensor();
  if (xv.rows() != a.n())
    throw DimensionError("spmm shape mismatch: A is " + std::to_string(a.n()) +
                         "x" + std::to_string(a.n()) + ", x is " + xv.shape_str());
  DenseTensor out(a.n(), xv.cols());
  K().spmm_csr(a.rowptr().data(), a.colidx().data(), a.vals().data(), a.n(),
               xv.data(), xv.cols(), out.data());
  const int ix = x.id;
  const SparseMatrix* ap = &a;
  return TapeOps::push(*x.tape, std::move(out), [ix, ap](Tape& t, const DenseTensor& g) {
    DenseTensor& gx = TapeOps::grad(t, ix);
    K().spmm_csr_t(ap->rowptr().data(), ap->colidx().data(), ap->vals().data(),
                   ap->n(), g.data(), g.cols(), gx.data());
  });
}

// ---- elementwise binary ---------------------------------------------------

Value add(Value a, Value b) {
  check_same_tape(a, b, "add");
  check_same_shape(a, b, "add");
  DenseTensor out(a.rows(), a.cols());
  K().add(a.tensor().data(), b.tensor().data(), out.data(), out.size());
  const int ia = a.id, ib = b.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    accum(TapeOps::grad(t, ia), g);
    accum(TapeOps::grad(t, ib), g);
  });
}

Value sub(Value a, Value b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a, b, "sub");
  DenseTensor out(a.rows(), a.cols());
  K().sub(a.tensor().data(), b.tensor().data(), out.data(), out.size());
  const int ia = a.id, ib = b.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    accum(TapeOps::grad(t, ia), g);
    K().axpy(-1.0, g.data(), TapeOps::grad(t, ib).data(), g.size());
  });
}

Value mul(Value a, Value b) {
  check_same_tape(a, b, "mul");
  check_same_shape(a, b, "mul");
  DenseTensor out(a.rows(), a.cols());
  K().mul(a.tensor().data(), b.tensor().data(), out.data(), out.size());
  const int ia = a.id, ib = b.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    const DenseTensor& B = TapeOps::val(t, ib);
    DenseTensor tmp(g.rows(), g.cols());
    K().mul(g.data(), B.data(), tmp.data(), g.size());
    accum(TapeOps::grad(t, ia), tmp);
    K().mul(g.data(), A.data(), tmp.data(), g.size());
    accum(TapeOps::grad(t, ib), tmp);
  });
}

Value vmax(Value a, Value b) {
  check_same_tape(a, b, "vmax");
  check_same_shape(a, b, "vmax");
  DenseTensor out(a.rows(), a.cols());
  K().vmax(a.tensor().data(), b.tensor().data(), out.data(), out.size());
  const int ia = a.id, ib = b.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    const DenseTensor& B = TapeOps::val(t, ib);
    K().max_select_bwd(A.data(), B.data(), g.data(), TapeOps::grad(t, ia).data(),
                       TapeOps::grad(t, ib).data(), g.size());
  });
}

// ---- scalar / broadcast ----------------------------------------------------

Value scale(Value a, double c) {
  DenseTensor out(a.rows(), a.cols());
  K().scale(a.tensor().data(), c, out.data(), out.size());
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, c](Tape& t, const DenseTensor& g) {
    K().axpy(c, g.data(), TapeOps::grad(t, ia).data(), g.size());
  });
}

Value scale_by(Value a, Value s) {
  check_same_tape(a, s, "scale_by");
  check_scalar(s, "scale_by");
  const double sv = s.tensor().at(0, 0);
  DenseTensor out(a.rows(), a.cols());
  K().scale(a.tensor().data(), sv, out.data(), out.size());
  const int ia = a.id, is = s.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, is, sv](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    K().axpy(sv, g.data(), TapeOps::grad(t, ia).data(), g.size());
    TapeOps::grad(t, is).at(0, 0) += K().dot(A.data(), g.data(), g.size());
  });
}

Value add_scalar(Value a, Value s) {
  check_same_tape(a, s, "add_scalar");
  check_scalar(s, "add_scalar");
  const double sv = s.tensor().at(0, 0);
  DenseTensor out = a.tensor();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += sv;
  const int ia = a.id, is = s.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, is](Tape& t, const DenseTensor& g) {
    accum(TapeOps::grad(t, ia), g);
    TapeOps::grad(t, is).at(0, 0) += K().vsum(g.data(), g.size());
  });
}

Value add_bias(Value a, Value bias) {
  check_same_tape(a, bias, "add_bias");
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw DimensionError("add_bias expects 1x" + std::to_string(a.cols()) +
                         ", got " + bias.tensor().shape_str());
  DenseTensor out = a.tensor();
  const DenseTensor& bv = bias.tensor();
  for (int r = 0; r < out.rows(); ++r)
    K().axpy(1.0, bv.data(), out.data() + static_cast<std::size_t>(r) * out.cols(),
             static_cast<std::size_t>(out.cols()));
  const int ia = a.id, ib = bias.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, ib](Tape& t, const DenseTensor& g) {
    accum(TapeOps::grad(t, ia), g);
    DenseTensor& gb = TapeOps::grad(t, ib);
    for (int r = 0; r < g.rows(); ++r)
      K().axpy(1.0, g.data() + static_cast<std::size_t>(r) * g.cols(), gb.data(),
               static_cast<std::size_t>(g.cols()));
  });
}

Value row_scale(Value a, Value s) {
  check_same_tape(a, s, "row_scale");
  if (s.rows() != a.rows() || s.cols() != 1)
    throw DimensionError("row_scale expects " + std::to_string(a.rows()) +
                         "x1, got " + s.tensor().shape_str());
  const DenseTensor& av = a.tensor();
  const DenseTensor& sv = s.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (int r = 0; r < av.rows(); ++r)
    K().scale(av.data() + static_cast<std::size_t>(r) * av.cols(), sv.at(r, 0),
              out.data() + static_cast<std::size_t>(r) * av.cols(),
              static_cast<std::size_t>(av.cols()));
  const int ia = a.id, is = s.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, is](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    const DenseTensor& S = TapeOps::val(t, is);
    DenseTensor& ga = TapeOps::grad(t, ia);
    DenseTensor& gs = TapeOps::grad(t, is);
    const std::size_t c = static_cast<std::size_t>(g.cols());
    for (int r = 0; r < g.rows(); ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * c;
      K().axpy(S.at(r, 0), g.data() + off, ga.data() + off, c);
      gs.at(r, 0) += K().dot(A.data() + off, g.data() + off, c);
    }
  });
}

Value max_scalar(Value a, double c) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i)
    out.data()[i] = av.data()[i] > c ? av.data()[i] : c;
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, c](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    DenseTensor& ga = TapeOps::grad(t, ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (A.data()[i] > c) ga.data()[i] += g.data()[i];
  });
}

// ---- unary nonlinearities ---------------------------------------------------

Value relu(Value a) {
  DenseTensor out(a.rows(), a.cols());
  K().relu(a.tensor().data(), out.data(), out.size());
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia](Tape& t, const DenseTensor& g) {
    K().relu_bwd(TapeOps::val(t, ia).data(), g.data(), TapeOps::grad(t, ia).data(),
                 g.size());
  });
}

Value elu(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av.data()[i];
    out.data()[i] = x > 0.0 ? x : std::expm1(x);
  }
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    DenseTensor& ga = TapeOps::grad(t, ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = A.data()[i];
      ga.data()[i] += x > 0.0 ? g.data()[i] : g.data()[i] * std::exp(x);
    }
  });
}

Value lrelu(Value a, double slope) {
  DenseTensor out(a.rows(), a.cols());
  K().lrelu(a.tensor().data(), slope, out.data(), out.size());
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, slope](Tape& t, const DenseTensor& g) {
    K().lrelu_bwd(TapeOps::val(t, ia).data(), g.data(), slope,
                  TapeOps::grad(t, ia).data(), g.size());
  });
}

Value sigmoid(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av.data()[i];
    out.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
  }
  const int ia = a.id;
  return TapeOps::push_self(*a.tape, std::move(out), [ia](int self) {
    return [ia, self](Tape& t, const DenseTensor& g) {
      const DenseTensor& Y = TapeOps::val(t, self);
      DenseTensor& ga = TapeOps::grad(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = Y.data()[i];
        ga.data()[i] += g.data()[i] * y * (1.0 - y);
      }
    };
  });
}

Value vtanh(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data()[i] = std::tanh(av.data()[i]);
  const int ia = a.id;
  return TapeOps::push_self(*a.tape, std::move(out), [ia](int self) {
    return [ia, self](Tape& t, const DenseTensor& g) {
      const DenseTensor& Y = TapeOps::val(t, self);
      DenseTensor& ga = TapeOps::grad(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = Y.data()[i];
        ga.data()[i] += g.data()[i] * (1.0 - y * y);
      }
    };
  });
}

Value vexp(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data()[i] = std::exp(av.data()[i]);
  const int ia = a.id;
  return TapeOps::push_self(*a.tape, std::move(out), [ia](int self) {
    return [ia, self](Tape& t, const DenseTensor& g) {
      const DenseTensor& Y = TapeOps::val(t, self);
      DenseTensor& ga = TapeOps::grad(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * Y.data()[i];
    };
  });
}

Value vlog(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av.data()[i] <= 0.0)
      throw DimensionError("vlog requires positive entries");
    out.data()[i] = std::log(av.data()[i]);
  }
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia](Tape& t, const DenseTensor& g) {
    const DenseTensor& A = TapeOps::val(t, ia);
    DenseTensor& ga = TapeOps::grad(t, ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga.data()[i] += g.data()[i] / A.data()[i];
  });
}

Value vrecip(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av.data()[i] == 0.0)
      throw DimensionError("vrecip requires nonzero entries");
    out.data()[i] = 1.0 / av.data()[i];
  }
  const int ia = a.id;
  return TapeOps::push_self(*a.tape, std::move(out), [ia](int self) {
    return [ia, self](Tape& t, const DenseTensor& g) {
      const DenseTensor& Y = TapeOps::val(t, self);
      DenseTensor& ga = TapeOps::grad(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] -= g.data()[i] * Y.data()[i] * Y.data()[i];
    };
  });
}

// ---- shape ops -------------------------------------------------------------

Value concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) throw UsageError("concat_cols needs at least one input");
  Tape* tape = xs[0].tape;
  int total = 0;
  const int rows = xs[0].rows();
  for (const Value& x : xs) {
    if (x.tape != tape) throw UsageError("concat_cols: mixed tapes");
    if (x.rows() != rows)
      throw DimensionError("concat_cols row mismatch: " + std::to_string(rows) +
                           " vs " + std::to_string(x.rows()));
    total += x.cols();
  }
  DenseTensor out(rows, total);
  int off = 0;
  for (const Value& x : xs) {
    const DenseTensor& xv = x.tensor();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < xv.cols(); ++c) out.at(r, off + c) = xv.at(r, c);
    off += xv.cols();
  }
  std::vector<int> ids;
  std::vector<int> widths;
  for (const Value& x : xs) {
    ids.push_back(x.id);
    widths.push_back(x.cols());
  }
  return TapeOps::push(*tape, std::move(out),
                       [ids, widths](Tape& t, const DenseTensor& g) {
    int off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      DenseTensor& gx = TapeOps::grad(t, ids[k]);
      for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < widths[k]; ++c) gx.at(r, c) += g.at(r, off2 + c);
      off2 += widths[k];
    }
  });
}

Value slice_cols(Value a, int c0, int c1) {
  const DenseTensor& av = a.tensor();
  if (c0 < 0 || c1 > av.cols() || c0 >= c1)
    throw DimensionError("slice_cols [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") out of range for " + av.shape_str());
  DenseTensor out(av.rows(), c1 - c0);
  for (int r = 0; r < av.rows(); ++r)
    for (int c = c0; c < c1; ++c) out.at(r, c - c0) = av.at(r, c);
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, c0](Tape& t, const DenseTensor& g) {
    DenseTensor& ga = TapeOps::grad(t, ia);
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) ga.at(r, c0 + c) += g.at(r, c);
  });
}

Value cell(Value a, int r, int c) {
  const DenseTensor& av = a.tensor();
  if (r < 0 || r >= av.rows() || c < 0 || c >= av.cols())
    throw DimensionError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                         ") out of range for " + av.shape_str());
  DenseTensor out = DenseTensor::scalar(av.at(r, c));
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, r, c](Tape& t, const DenseTensor& g) {
    TapeOps::grad(t, ia).at(r, c) += g.at(0, 0);
  });
}

// ---- softmax / loss ---------------------------------------------------------

Value softmax_rows(Value a) {
  const DenseTensor& av = a.tensor();
  DenseTensor out(av.rows(), av.cols());
  for (int r = 0; r < av.rows(); ++r) {
    double m = av.at(r, 0);
    for (int c = 1; c < av.cols(); ++c) m = std::max(m, av.at(r, c));
    double den = 0.0;
    for (int c = 0; c < av.cols(); ++c) {
      const double e = std::exp(av.at(r, c) - m);
      out.at(r, c) = e;
      den += e;
    }
    for (int c = 0; c < av.cols(); ++c) out.at(r, c) /= den;
  }
  const int ia = a.id;
  return TapeOps::push_self(*a.tape, std::move(out), [ia](int self) {
    return [ia, self](Tape& t, const DenseTensor& g) {
      const DenseTensor& Y = TapeOps::val(t, self);
      DenseTensor& ga = TapeOps::grad(t, ia);
      for (int r = 0; r < g.rows(); ++r) {
        double dotv = 0.0;
        for (int c = 0; c < g.cols(); ++c) dotv += g.at(r, c) * Y.at(r, c);
        for (int c = 0; c < g.cols(); ++c)
          ga.at(r, c) += Y.at(r, c) * (g.at(r, c) - dotv);
      }
    };
  });
}

Value sum_all(Value a) {
  DenseTensor out = DenseTensor::scalar(K().vsum(a.tensor().data(), a.tensor().size()));
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia](Tape& t, const DenseTensor& g) {
    const double gv = g.at(0, 0);
    DenseTensor& ga = TapeOps::grad(t, ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gv;
  });
}

Value cross_entropy(Value logits, const std::vector<int>& labels,
                    const std::vector<int>& mask) {
  const DenseTensor& lv = logits.tensor();
  if (mask.empty()) throw UsageError("cross_entropy: empty node mask");
  if (static_cast<int>(labels.size()) != lv.rows())
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(lv.rows()) + " rows");
  auto rows = std::make_shared<std::vector<std::pair<int, int>>>();
  rows->reserve(mask.size());
  for (int u : mask) {
    if (u < 0 || u >= lv.rows())
      throw DimensionError("cross_entropy: mask row " + std::to_string(u) +
                           " out of range");
    const int y = labels[static_cast<std::size_t>(u)];
    if (y < 0 || y >= lv.cols())
      throw DimensionError("cross_entropy: label " + std::to_string(y) +
                           " out of range at row " + std::to_string(u));
    rows->emplace_back(u, y);
  }
  double loss = 0.0;
  for (const auto& [u, y] : *rows) {
    double m = lv.at(u, 0);
    for (int c = 1; c < lv.cols(); ++c) m = std::max(m, lv.at(u, c));
    double den = 0.0;
    for (int c = 0; c < lv.cols(); ++c) den += std::exp(lv.at(u, c) - m);
    loss += m + std::log(den) - lv.at(u, y);
  }
  loss /= static_cast<double>(rows->size());
  const int il = logits.id;
  return TapeOps::push(*logits.tape, DenseTensor::scalar(loss),
                       [il, rows](Tape& t, const DenseTensor& g) {
    const DenseTensor& L = TapeOps::val(t, il);
    DenseTensor& gl = TapeOps::grad(t, il);
    const double gv = g.at(0, 0) / static_cast<double>(rows->size());
    for (const auto& [u, y] : *rows) {
      double m = L.at(u, 0);
      for (int c = 1; c < L.cols(); ++c) m = std::max(m, L.at(u, c));
      double den = 0.0;
      for (int c = 0; c < L.cols(); ++c) den += std::exp(L.at(u, c) - m);
      for (int c = 0; c < L.cols(); ++c) {
        const double p = std::exp(L.at(u, c) - m) / den;
        gl.at(u, c) += gv * (p - (c == y ? 1.0 : 0.0));
      }
    }
  });
}

Value dropout(Value a, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw UsageError("dropout rate must be in [0,1), got " + std::to_string(p));
  if (p == 0.0) return a;
  const DenseTensor& av = a.tensor();
  auto mask = std::make_shared<DenseTensor>(av.rows(), av.cols());
  const double keep = 1.0 - p;
  const double inv = 1.0 / keep;
  for (std::size_t i = 0; i < mask->size(); ++i)
    mask->data()[i] = rng.uniform() < keep ? inv : 0.0;
  DenseTensor out(av.rows(), av.cols());
  K().mul(av.data(), mask->data(), out.data(), out.size());
  const int ia = a.id;
  return TapeOps::push(*a.tape, std::move(out), [ia, mask](Tape& t, const DenseTensor& g) {
    DenseTensor& ga = TapeOps::grad(t, ia);
    DenseTensor tmp(g.rows(), g.cols());
    K().mul(g.data(), mask->data(), tmp.data(), g.size());
    accum(ga, tmp);
  });
}

// ---- attention aggregation ---------------------------------------------------

Value gat_aggregate(Value z, Value p, Value q, const GatStructure& st, double slope) {
  check_same_tape(z, p, "gat_aggregate");
  check_same_tape(z, q, "gat_aggregate");
  const DenseTensor& zv = z.tensor();
  const DenseTensor& pv = p.tensor();
  const DenseTensor& qv = q.tensor();
  if (zv.rows() != st.n || pv.rows() != st.n || qv.rows() != st.n ||
      pv.cols() != 1 || qv.cols() != 1)
    throw DimensionError("gat_aggregate shape mismatch: z " + zv.shape_str() +
                         ", p " + pv.shape_str() + ", q " + qv.shape_str() +
                         ", n=" + std::to_string(st.n));
  const int d = zv.cols();
  auto alphas = std::make_shared<std::vector<double>>(st.idx.size(), 0.0);
  DenseTensor out(st.n, d);
  for (int u = 0; u < st.n; ++u) {
    const int lo = st.ptr[u], hi = st.ptr[u + 1];
    double m = -1e300;
    for (int e = lo; e < hi; ++e) {
      const double pre = pv.at(u, 0) + qv.at(st.idx[e], 0);
      const double act = pre > 0.0 ? pre : slope * pre;
      (*alphas)[static_cast<std::size_t>(e)] = act;
      m = std::max(m, act);
    }
    double den = 0.0;
    for (int e = lo; e < hi; ++e) {
      const double w = std::exp((*alphas)[static_cast<std::size_t>(e)] - m);
      (*alphas)[static_cast<std::size_t>(e)] = w;
      den += w;
    }
    double* orow = out.data() + static_cast<std::size_t>(u) * d;
    for (int e = lo; e < hi; ++e) {
      const double al = (*alphas)[static_cast<std::size_t>(e)] / den;
      (*alphas)[static_cast<std::size_t>(e)] = al;
      K().axpy(al, zv.data() + static_cast<std::size_t>(st.idx[e]) * d, orow,
               static_cast<std::size_t>(d));
    }
  }
  const int iz = z.id, ip = p.id, iq = q.id;
  const GatStructure* stp = &st;
  return TapeOps::push(*z.tape, std::move(out),
                       [iz, ip, iq, stp, slope, alphas](Tape& t, const DenseTensor& g) {
    const DenseTensor& Z = TapeOps::val(t, iz);
    const DenseTensor& P = TapeOps::val(t, ip);
    const DenseTensor& Q = TapeOps::val(t, iq);
    DenseTensor& gz = TapeOps::grad(t, iz);
    DenseTensor& gp = TapeOps::grad(t, ip);
    DenseTensor& gq = TapeOps::grad(t, iq);
    const int d2 = Z.cols();
    std::vector<double> dots;
    for (int u = 0; u < stp->n; ++u) {
      const int lo = stp->ptr[u], hi = stp->ptr[u + 1];
      const double* grow = g.data() + static_cast<std::size_t>(u) * d2;
      dots.assign(static_cast<std::size_t>(hi - lo), 0.0);
      double s1 = 0.0;
      for (int e = lo; e < hi; ++e) {
        const double dv = K().dot(grow, Z.data() + static_cast<std::size_t>(stp->idx[e]) * d2,
                                  static_cast<std::size_t>(d2));
        dots[static_cast<std::size_t>(e - lo)] = dv;
        s1 += (*alphas)[static_cast<std::size_t>(e)] * dv;
      }
      for (int e = lo; e < hi; ++e) {
        const int j = stp->idx[e];
        const double al = (*alphas)[static_cast<std::size_t>(e)];
        const double de = al * (dots[static_cast<std::size_t>(e - lo)] - s1);
        const double pre = P.at(u, 0) + Q.at(j, 0);
        const double dpre = de * (pre > 0.0 ? 1.0 : slope);
        gp.at(u, 0) += dpre;
        gq.at(j, 0) += dpre;
        K().axpy(al, grow, gz.data() + static_cast<std::size_t>(j) * d2,
                 static_cast<std::size_t>(d2));
      }
    }
  });
}

// ---- list reductions ----------------------------------------------------------

Value reduce_sum(const std::vector<Value>& xs) {
  if (xs.empty()) throw UsageError("reduce_sum needs at least one input");
  Value acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Value reduce_mean(const std::vector<Value>& xs) {
  return scale(reduce_sum(xs), 1.0 / static_cast<double>(xs.size()));
}

Value reduce_max(const std::vector<Value>& xs) {
  if (xs.empty()) throw UsageError("reduce_max needs at least one input");
  Value acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = vmax(acc, xs[i]);
  return acc;
}

}  // namespace f2
