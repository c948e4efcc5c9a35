#pragma once

#include <string>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/rng.hpp"
#include "f2/tensor.hpp"

namespace f2 {

enum class FuseKind { Sum, Mean, Max, Concat, Lstm, Att };

FuseKind fuse_from_string(const std::string& s);
const char* to_string(FuseKind k);

// Parameters for one fusion site. CONCAT's projection is sized for the
// number of fusion slots the owner feeds it (k inputs of width d project
// from k*d back to d); LSTM and ATT parameters depend only on d.
struct FusionParams {
  FuseKind kind = FuseKind::Sum;
  DenseTensor concat_proj;             // (k*d) x d
  DenseTensor lstm_wx, lstm_wh, lstm_b;  // d x 4d, d x 4d, 1 x 4d; gate order [i f g o]
  DenseTensor att_v;                   // d x 1

  std::vector<DenseTensor*> params();
};

FusionParams make_fusion(FuseKind kind, int d, int k_inputs, Rng& rng);

// Weighted fusion over k inputs of shape (n, d), one scalar weight Value
// per input. Unit weights make every candidate collapse to its plain
// textbook form; a zero weight removes an input's influence exactly:
//   SUM     sum_i w_i x_i
//   MEAN    sum_i w_i x_i / max(sum_i w_i, 1e-12)
//   MAX     max_i (w_i x_i + log-mask), the mask sending w=0 slots to -inf
//   CONCAT  columns [w_1 x_1 | ... | w_k x_k] times the projection
//   LSTM    recurrent cell where step t blends w_t of the new state with
//           1-w_t of the previous one, so w=0 skips the input entirely
//   ATT     per-node softmax over per-input scores x_i v, shifted by the
//           log-mask so w=0 slots get (numerically) zero attention
// The log-mask is ln(max(w_i, 1e-300) / max(max_l w_l, 1e-300)): zero at the
// largest weight, so it only ever pushes scores down and stays finite even
// when sharp selection weights underflow to 0.
Value fuse_weighted(Tape& t, FusionParams& p, const std::vector<Value>& inputs,
                    const std::vector<Value>& weights);

// Plain fusion: unit weight per input. Empty input list is a usage error;
// callers handle the nothing-selected case before fusing.
Value fuse(Tape& t, FusionParams& p, const std::vector<Value>& inputs);

}  // namespace f2
