#pragma once

#include <string>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/graph.hpp"
#include "f2/rng.hpp"
#include "f2/tensor.hpp"

namespace f2 {

enum class AggKind { Gcn, Gat, Sage, Gin };
enum class ActKind { Relu, Elu };

AggKind agg_from_string(const std::string& s);
ActKind act_from_string(const std::string& s);
const char* to_string(AggKind k);
const char* to_string(ActKind k);

Value apply_act(ActKind act, Value v);

// Parameters for one aggregation layer. Only the fields for `kind` are
// sized; the rest stay 0x0. params() returns the live slots so optimizers
// and copy routines never need per-kind switches.
struct LayerParams {
  AggKind kind = AggKind::Gcn;
  DenseTensor w;          // GCN / GAT transform
  DenseTensor a_src;      // GAT attention vectors, d_out x 1
  DenseTensor a_dst;
  DenseTensor w_self;     // SAGE
  DenseTensor w_neigh;
  DenseTensor eps;        // GIN, 1x1
  DenseTensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // GIN post-aggregation MLP

  std::vector<DenseTensor*> params();
};

LayerParams make_layer(AggKind kind, int d_in, int d_out, Rng& rng);

// One aggregation step; the caller applies the activation afterwards
// (GIN's internal MLP is the exception and uses `act` inside).
Value layer_forward(Tape& t, LayerParams& p, Value h, const GraphOps& ops, ActKind act);

// Pre/post-process perceptrons. A 1-layer instance (w2 unallocated) is
// purely linear; the 2-layer form applies `act` between the matmuls.
struct MlpParams {
  DenseTensor w1, b1;
  DenseTensor w2, b2;

  bool two_layer() const { return w2.rows() > 0; }
  std::vector<DenseTensor*> params();
};

MlpParams make_mlp1(int d_in, int d_out, Rng& rng);
MlpParams make_mlp2(int d_in, int d_hidden, int d_out, Rng& rng);

Value mlp_forward(Tape& t, MlpParams& p, Value h, ActKind act);

}  // namespace f2
