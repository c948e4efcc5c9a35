#include "f2/layers.hpp"

#include "f2/errors.hpp"

namespace f2 {

namespace {
constexpr double kGatSlope = 0.2;
}

AggKind agg_from_string(const std::string& s) {
  if (s == "GCN" || s == "gcn") return AggKind::Gcn;
  if (s == "GAT" || s == "gat") return AggKind::Gat;
  if (s == "SAGE" || s == "sage") return AggKind::Sage;
  if (s == "GIN" || s == "gin") return AggKind::Gin;
  throw UsageError("unknown aggregation '" + s + "' (expected GCN, GAT, SAGE, or GIN)");
}

ActKind act_from_string(const std::string& s) {
  if (s == "relu") return ActKind::Relu;
  if (s == "elu") return ActKind::Elu;
  throw UsageError("unknown activation '" + s + "' (expected relu or elu)");
}

const char* to_string(AggKind k) {
  switch (k) {
    case AggKind::Gcn: return "GCN";
    case AggKind::Gat: return "GAT";
    case AggKind::Sage: return "SAGE";
    case AggKind::Gin: return "GIN";
  }
  return "?";
}

const char* to_string(ActKind k) {
  return k == ActKind::Relu ? "relu" : "elu";
}

Value apply_act(ActKind act, Value v) {
  return act == ActKind::Relu ? relu(v) : elu(v);
}

std::vector<DenseTensor*> LayerParams::params() {
  switch (kind) {
    case AggKind::Gcn: return {&w};
    case AggKind::Gat: return {&w, &a_src, &a_dst};
    case AggKind::Sage: return {&w_self, &w_neigh};
    case AggKind::Gin: return {&eps, &mlp_w1, &mlp_b1, &mlp_w2, &mlp_b2};
  }
  return {};
}

LayerParams make_layer(AggKind kind, int d_in, int d_out, Rng& rng) {
  LayerParams p;
  p.kind = kind;
  switch (kind) {
    case AggKind::Gcn:
      p.w = DenseTensor::glorot(d_in, d_out, rng);
      break;
    case AggKind::Gat:
      p.w = DenseTensor::glorot(d_in, d_out, rng);
      p.a_src = DenseTensor::glorot(d_out, 1, rng);
      p.a_dst = DenseTensor::glorot(d_out, 1, rng);
      break;
    case AggKind::Sage:
      p.w_self = DenseTensor::glorot(d_in, d_out, rng);
      p.w_neigh = DenseTensor::glorot(d_in, d_out, rng);
      break;
    case AggKind::Gin:
      p.eps = DenseTensor(1, 1);
      p.mlp_w1 = DenseTensor::glorot(d_in, d_out, rng);
      p.mlp_b1 = DenseTensor(1, d_out);
      p.mlp_w2 = DenseTensor::glorot(d_out, d_out, rng);
      p.mlp_b2 = DenseTensor(1, d_out);
      break;
  }
  return p;
}

Value layer_forward(Tape& t, LayerParams& p, Value h, const GraphOps& ops, ActKind act) {
  switch (p.kind) {
    case AggKind::Gcn:
      return spmm(ops.a_sym, matmul(h, t.param(&p.w)));
    case AggKind::Gat: {
      Value z = matmul(h, t.param(&p.w));
      Value ps = matmul(z, t.param(&p.a_src));
      Value qs = matmul(z, t.param(&p.a_dst));
      return gat_aggregate(z, ps, qs, ops.gat, kGatSlope);
    }
    case AggKind::Sage: {
      Value self = matmul(h, t.param(&p.w_self));
      Value nbr = matmul(spmm(ops.a_mean, h), t.param(&p.w_neigh));
      return add(self, nbr);
    }
    case AggKind::Gin: {
      // (1 + eps) h_u + sum over neighbors, then the 2-layer MLP
      Value summed = spmm(ops.a_sum, h);
      Value pre = add(add(h, scale_by(h, t.param(&p.eps))), summed);
      Value hidden = apply_act(act, add_bias(matmul(pre, t.param(&p.mlp_w1)), t.param(&p.mlp_b1)));
      return add_bias(matmul(hidden, t.param(&p.mlp_w2)), t.param(&p.mlp_b2));
    }
  }
  throw UsageError("unhandled layer kind");
}

std::vector<DenseTensor*> MlpParams::params() {
  if (two_layer()) return {&w1, &b1, &w2, &b2};
  return {&w1, &b1};
}

MlpParams make_mlp1(int d_in, int d_out, Rng& rng) {
  MlpParams p;
  p.w1 = DenseTensor::glorot(d_in, d_out, rng);
  p.b1 = DenseTensor(1, d_out);
  return p;
}

MlpParams make_mlp2(int d_in, int d_hidden, int d_out, Rng& rng) {
  MlpParams p;
  p.w1 = DenseTensor::glorot(d_in, d_hidden, rng);
  p.b1 = DenseTensor(1, d_hidden);
  p.w2 = DenseTensor::glorot(d_hidden, d_out, rng);
  p.b2 = DenseTensor(1, d_out);
  return p;
}

Value mlp_forward(Tape& t, MlpParams& p, Value h, ActKind act) {
  Value first = add_bias(matmul(h, t.param(&p.w1)), t.param(&p.b1));
  if (!p.two_layer()) return first;
  return add_bias(matmul(apply_act(act, first), t.param(&p.w2)), t.param(&p.b2));
}

}  // namespace f2
