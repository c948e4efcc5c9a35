#include "f2/supernet.hpp"

#include <algorithm>
#include <cmath>

#include "f2/errors.hpp"
#include "f2/metrics.hpp"

namespace f2 {

namespace {

constexpr double kAlphaInit = 1e-3;

int argmax_row(const DenseTensor& row) {
  int best = 0;
  for (int k = 1; k < row.cols(); ++k)
    if (row.at(0, k) > row.at(0, best)) best = k;
  return best;
}

DenseTensor one_hot_row(int width, int hot, double margin) {
  DenseTensor row(1, width);
  row.at(0, hot) = margin;
  return row;
}

}  // namespace

std::vector<double> softmax_with_temperature(const std::vector<double>& alpha,
                                             double lambda) {
  if (lambda <= 0.0)
    throw UsageError("softmax temperature must be positive, got " + std::to_string(lambda));
  double hi = alpha[0];
  for (double a : alpha) hi = std::max(hi, a);
  std::vector<double> c(alpha.size());
  double z = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    c[k] = std::exp((alpha[k] - hi) / lambda);
    z += c[k];
  }
  for (double& v : c) v /= z;
  return c;
}

Value softmax_with_temperature(Tape& t, Value alpha_row, double lambda) {
  if (lambda <= 0.0)
    throw UsageError("softmax temperature must be positive, got " + std::to_string(lambda));
  return softmax_rows(scale(alpha_row, 1.0 / lambda));
}

Value mixed_selection(Tape& t, Value c, Value x) {
  (void)t;
  return scale_by(x, cell(c, 0, 1));
}

Value mixed_fusion(Tape& t, Value c, std::vector<FusionParams>& candidates,
                   const std::vector<Value>& inputs,
                   const std::vector<Value>& sel_weights) {
  if (inputs.empty()) throw UsageError("mixed fusion needs at least one input");
  if (candidates.size() != 6)
    throw UsageError("mixed fusion expects all six fusion candidates, got " +
                     std::to_string(candidates.size()));
  if (c.tensor().rows() != 1 || c.tensor().cols() != 6)
    throw DimensionError("fusion weights must be a 1x6 row");
  Value out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Value term =
        scale_by(fuse_weighted(t, candidates[k], inputs, sel_weights), cell(c, 0, (int)k));
    out = (k == 0) ? term : add(out, term);
  }
  return out;
}

Supernet::Supernet(const SupernetConfig& cfg, int in_dim, int num_classes, Rng& rng)
    : cfg_(cfg), in_dim_(in_dim), num_classes_(num_classes) {
  if (cfg.n_blocks < 1)
    throw UsageError("supernet needs at least one block, got " + std::to_string(cfg.n_blocks));
  if (cfg.hidden < 1) throw UsageError("supernet hidden width must be positive");
  if (in_dim < 1 || num_classes < 1)
    throw UsageError("supernet input width and class count must be positive");
  if (cfg.lambda <= 0.0)
    throw UsageError("softmax temperature must be positive, got " + std::to_string(cfg.lambda));
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw UsageError("dropout must be in [0, 1), got " + std::to_string(cfg.dropout));

  const int d = cfg.hidden;
  input_mlp_ = make_mlp1(in_dim, d, rng);
  for (int i = 1; i <= cfg.n_blocks; ++i) {
    MixedBlock b;
    for (int k = 0; k < 6; ++k)
      b.fusions.push_back(make_fusion(static_cast<FuseKind>(k), d, i, rng));
    if (cfg.learnable_agg) {
      for (int k = 0; k < 4; ++k)
        b.layers.push_back(make_layer(static_cast<AggKind>(k), d, d, rng));
    } else {
      b.layers.push_back(make_layer(cfg.fixed_agg, d, d, rng));
    }
    for (int j = 0; j < i; ++j)
      b.sel_alpha.push_back(DenseTensor::uniform(1, 2, -kAlphaInit, kAlphaInit, rng));
    b.fuse_alpha = DenseTensor::uniform(1, 6, -kAlphaInit, kAlphaInit, rng);
    if (cfg.learnable_agg)
      b.agg_alpha = DenseTensor::uniform(1, 4, -kAlphaInit, kAlphaInit, rng);
    blocks_.push_back(std::move(b));
  }
  for (int k = 0; k < 6; ++k)
    out_fusions_.push_back(make_fusion(static_cast<FuseKind>(k), d, cfg.n_blocks + 1, rng));
  for (int j = 0; j <= cfg.n_blocks; ++j)
    out_sel_alpha_.push_back(DenseTensor::uniform(1, 2, -kAlphaInit, kAlphaInit, rng));
  out_fuse_alpha_ = DenseTensor::uniform(1, 6, -kAlphaInit, kAlphaInit, rng);
  output_mlp_ = make_mlp2(d, d, num_classes, rng);
}

void Supernet::set_lambda(double lambda) {
  if (lambda <= 0.0)
    throw UsageError("softmax temperature must be positive, got " + std::to_string(lambda));
  cfg_.lambda = lambda;
}

Value Supernet::forward(Tape& t, const DenseTensor& features, const GraphOps& ops,
                        bool train, Rng& drop_rng) {
  if (features.cols() != in_dim_)
    throw DimensionError("supernet expects " + std::to_string(in_dim_) +
                         "-wide features, got " + std::to_string(features.cols()));
  const double lambda = cfg_.lambda;
  auto drop = [&](Value v) {
    return (train && cfg_.dropout > 0.0) ? dropout(v, cfg_.dropout, drop_rng) : v;
  };

  Value one = t.leaf(DenseTensor::scalar(1.0));
  std::vector<Value> levels;
  levels.push_back(drop(mlp_forward(t, input_mlp_, t.leaf(features), cfg_.act)));

  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    MixedBlock& b = blocks_[i];
    std::vector<Value> sel_w;
    Value off_product;
    for (std::size_t j = 0; j <= i; ++j) {
      Value c = softmax_with_temperature(t, t.param(&b.sel_alpha[j]), lambda);
      Value w = cell(c, 0, 1);
      sel_w.push_back(w);
      Value off = sub(one, w);
      off_product = (j == 0) ? off : mul(off_product, off);
    }
    Value gate = sub(one, off_product);

    Value fuse_c = softmax_with_temperature(t, t.param(&b.fuse_alpha), lambda);
    Value fused = mixed_fusion(t, fuse_c, b.fusions, levels, sel_w);

    Value aggregated;
    if (cfg_.learnable_agg) {
      Value agg_c = softmax_with_temperature(t, t.param(&b.agg_alpha), lambda);
      for (std::size_t k = 0; k < b.layers.size(); ++k) {
        Value term = scale_by(layer_forward(t, b.layers[k], fused, ops, cfg_.act),
                              cell(agg_c, 0, (int)k));
        aggregated = (k == 0) ? term : add(aggregated, term);
      }
    } else {
      aggregated = layer_forward(t, b.layers[0], fused, ops, cfg_.act);
    }
    levels.push_back(drop(scale_by(apply_act(cfg_.act, aggregated), gate)));
  }

  std::vector<Value> out_w;
  for (std::size_t j = 0; j < out_sel_alpha_.size(); ++j) {
    Value c = softmax_with_temperature(t, t.param(&out_sel_alpha_[j]), lambda);
    out_w.push_back(cell(c, 0, 1));
  }
  Value out_c = softmax_with_temperature(t, t.param(&out_fuse_alpha_), lambda);
  Value fused = mixed_fusion(t, out_c, out_fusions_, levels, out_w);
  return mlp_forward(t, output_mlp_, fused, cfg_.act);
}

std::vector<DenseTensor*> Supernet::weight_params() {
  std::vector<DenseTensor*> out;
  auto append = [&](std::vector<DenseTensor*> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  append(input_mlp_.params());
  for (MixedBlock& b : blocks_) {
    for (FusionParams& f : b.fusions) append(f.params());
    for (LayerParams& l : b.layers) append(l.params());
  }
  for (FusionParams& f : out_fusions_) append(f.params());
  append(output_mlp_.params());
  return out;
}

std::vector<DenseTensor*> Supernet::alpha_params() {
  std::vector<DenseTensor*> out;
  for (MixedBlock& b : blocks_) {
    for (DenseTensor& a : b.sel_alpha) out.push_back(&a);
    out.push_back(&b.fuse_alpha);
    if (cfg_.learnable_agg) out.push_back(&b.agg_alpha);
  }
  for (DenseTensor& a : out_sel_alpha_) out.push_back(&a);
  out.push_back(&out_fuse_alpha_);
  return out;
}

DenseTensor eval_logits(Supernet& s, const Graph& g, const GraphOps& ops) {
  Tape t;
  Rng unused(0);
  return s.forward(t, g.features, ops, false, unused).tensor();
}

void align_alphas(Supernet& s, const TopologySpec& spec, double margin) {
  const SupernetConfig& cfg = s.config();
  if (spec.n_blocks != cfg.n_blocks)
    throw UsageError("spec has " + std::to_string(spec.n_blocks) + " blocks, supernet has " +
                     std::to_string(cfg.n_blocks));
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const BlockSpec& bs = spec.blocks[(std::size_t)i];
    if ((int)bs.select.size() != i + 1)
      throw UsageError("spec block " + std::to_string(i + 1) + " has the wrong mask width");
    if (!cfg.learnable_agg && bs.agg != cfg.fixed_agg)
      throw UsageError("supernet aggregation is fixed to " +
                       std::string(to_string(cfg.fixed_agg)) + " but the spec wants " +
                       to_string(bs.agg));
    Supernet::MixedBlock& b = s.blocks()[(std::size_t)i];
    for (int j = 0; j <= i; ++j)
      b.sel_alpha[(std::size_t)j] = one_hot_row(2, bs.select[(std::size_t)j] ? 1 : 0, margin);
    b.fuse_alpha = one_hot_row(6, (int)bs.fuse, margin);
    if (cfg.learnable_agg) b.agg_alpha = one_hot_row(4, (int)bs.agg, margin);
  }
  if ((int)spec.output.select.size() != cfg.n_blocks + 1)
    throw UsageError("spec readout mask has the wrong width");
  for (int j = 0; j <= cfg.n_blocks; ++j)
    s.output_sel_alpha()[(std::size_t)j] =
        one_hot_row(2, spec.output.select[(std::size_t)j] ? 1 : 0, margin);
  s.output_fuse_alpha() = one_hot_row(6, (int)spec.output.fuse, margin);
}

DeriveResult derive(const Supernet& s) {
  const SupernetConfig& cfg = s.config();
  DeriveResult out;
  out.spec.n_blocks = cfg.n_blocks;
  out.spec.hidden = cfg.hidden;
  out.spec.act = cfg.act;
  for (const Supernet::MixedBlock& b : s.blocks()) {
    BlockSpec bs;
    for (const DenseTensor& a : b.sel_alpha) bs.select.push_back(argmax_row(a) == 1);
    bs.fuse = static_cast<FuseKind>(argmax_row(b.fuse_alpha));
    bs.agg = cfg.learnable_agg ? static_cast<AggKind>(argmax_row(b.agg_alpha)) : cfg.fixed_agg;
    out.spec.blocks.push_back(bs);
  }
  bool any = false;
  for (const DenseTensor& a : s.output_sel_alpha()) {
    const bool on = argmax_row(a) == 1;
    out.spec.output.select.push_back(on);
    any = any || on;
  }
  if (!any) {
    // everything derived to ZERO; switch the most confident identity back on
    std::size_t best = 0;
    for (std::size_t j = 1; j < s.output_sel_alpha().size(); ++j)
      if (s.output_sel_alpha()[j].at(0, 1) > s.output_sel_alpha()[best].at(0, 1)) best = j;
    out.spec.output.select[best] = true;
    out.forced_output = true;
  }
  out.spec.output.fuse = static_cast<FuseKind>(argmax_row(s.output_fuse_alpha()));
  ensure_valid(out.spec);
  return out;
}

namespace {

// Concat projections in the supernet span every predecessor; the discrete
// net only stacks the surviving ones, so their row blocks are copied out.
DenseTensor slice_concat_rows(const DenseTensor& full, const std::vector<bool>& mask, int d) {
  int kept = 0;
  for (bool b : mask) kept += b ? 1 : 0;
  DenseTensor out(kept * d, full.cols());
  int at = 0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask[j]) continue;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < full.cols(); ++c) out.at(at * d + r, c) = full.at((int)j * d + r, c);
    ++at;
  }
  return out;
}

void copy_fusion(FusionParams& dst, const FusionParams& src, const std::vector<bool>& mask,
                 int d) {
  dst = src;
  if (src.kind == FuseKind::Concat) dst.concat_proj = slice_concat_rows(src.concat_proj, mask, d);
}

}  // namespace

ChildNet derive_childnet(Supernet& s, const TopologySpec& spec) {
  const SupernetConfig& cfg = s.config();
  if (spec.n_blocks != cfg.n_blocks || spec.hidden != cfg.hidden)
    throw UsageError("spec shape does not match the supernet");
  Rng rng(0);
  ChildNet child(spec, s.in_dim(), s.num_classes(), cfg.dropout, rng);
  child.input_mlp() = s.input_mlp();
  for (int i = 0; i < cfg.n_blocks; ++i) {
    const BlockSpec& bs = spec.blocks[(std::size_t)i];
    Supernet::MixedBlock& b = s.blocks()[(std::size_t)i];
    if (!cfg.learnable_agg && bs.agg != cfg.fixed_agg)
      throw UsageError("supernet aggregation is fixed to " +
                       std::string(to_string(cfg.fixed_agg)) + " but the spec wants " +
                       to_string(bs.agg));
    child.blocks()[(std::size_t)i].layer =
        b.layers[cfg.learnable_agg ? (std::size_t)bs.agg : 0];
    copy_fusion(child.blocks()[(std::size_t)i].fusion, b.fusions[(std::size_t)bs.fuse],
                bs.select, cfg.hidden);
  }
  copy_fusion(child.output_fusion(), s.output_fusions()[(std::size_t)spec.output.fuse],
              spec.output.select, cfg.hidden);
  child.output_mlp() = s.output_mlp();
  return child;
}

SearchResult search(Supernet& s, const Graph& g, const GraphOps& ops,
                    const SearchConfig& cfg) {
  if (cfg.epochs < 0)
    throw UsageError("search epochs must be non-negative, got " + std::to_string(cfg.epochs));
  if (cfg.w_lr <= 0.0) throw UsageError("weight learning rate must be positive");
  if (cfg.alpha_lr < 0.0) throw UsageError("alpha learning rate must be non-negative");
  if (!g.has_masks() || g.masks.train.empty() || g.masks.val.empty())
    throw UsageError("search needs non-empty train and val masks");
  s.set_lambda(cfg.lambda);

  Optimizer w_opt({cfg.w_optimizer, cfg.w_lr, cfg.w_weight_decay});
  Optimizer a_opt({cfg.alpha_optimizer, cfg.alpha_lr, cfg.alpha_weight_decay});
  std::vector<DenseTensor*> w_slots = s.weight_params();
  std::vector<DenseTensor*> a_slots = s.alpha_params();
  Rng drop_rng(cfg.seed);

  SearchResult out;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    SearchEpoch stat;
    stat.epoch = epoch;
    {
      Tape t;
      Value loss = cross_entropy(s.forward(t, g.features, ops, true, drop_rng), g.labels,
                                 g.masks.train);
      stat.train_loss = loss.tensor().at(0, 0);
      if (!std::isfinite(stat.train_loss))
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                            " during the weight step");
      t.backward(loss);
      std::vector<DenseTensor> grads;
      grads.reserve(w_slots.size());
      for (DenseTensor* slot : w_slots) grads.push_back(t.grad_for(slot));
      w_opt.step(w_slots, grads);
    }
    {
      Tape t;
      Value loss = cross_entropy(s.forward(t, g.features, ops, true, drop_rng), g.labels,
                                 g.masks.val);
      stat.val_loss = loss.tensor().at(0, 0);
      if (!std::isfinite(stat.val_loss))
        throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch) +
                            " during the architecture step");
      t.backward(loss);
      std::vector<DenseTensor> grads;
      grads.reserve(a_slots.size());
      for (DenseTensor* slot : a_slots) grads.push_back(t.grad_for(slot));
      a_opt.step(a_slots, grads);
    }
    DenseTensor logits = eval_logits(s, g, ops);
    stat.train_acc = accuracy(logits, g.labels, g.masks.train);
    stat.val_acc = accuracy(logits, g.labels, g.masks.val);
    out.history.push_back(stat);
  }
  out.derived = derive(s);
  return out;
}

GapPoint gap_between(Supernet& s, const DeriveResult& d, const Graph& g,
                     const GraphOps& ops) {
  if (!g.has_masks() || g.masks.val.empty())
    throw UsageError("gap measurement needs a val mask");
  GapPoint p;
  p.lambda = s.config().lambda;
  p.spec = d.spec;
  p.forced_output = d.forced_output;

  DenseTensor sup = eval_logits(s, g, ops);
  ChildNet child = derive_childnet(s, d.spec);
  DenseTensor hard = eval_logits(child, g, ops);

  p.supernet_val_acc = accuracy(sup, g.labels, g.masks.val);
  p.childnet_val_acc = accuracy(hard, g.labels, g.masks.val);
  p.gap_pp = std::fabs(p.supernet_val_acc - p.childnet_val_acc) * 100.0;
  p.max_logit_diff = sup.max_abs_diff(hard);
  return p;
}

GapReport measure_gap(const SupernetConfig& scfg, const Graph& g,
                      const std::vector<double>& lambdas, const SearchConfig& cfg) {
  GraphOps ops = build_graph_ops(g);
  GapReport report;
  for (double lambda : lambdas) {
    SupernetConfig sc = scfg;
    sc.lambda = lambda;
    SearchConfig run = cfg;
    run.lambda = lambda;
    Rng rng(cfg.seed);
    Supernet s(sc, g.feature_dim(), g.num_classes, rng);
    SearchResult res = search(s, g, ops, run);
    report.points.push_back(gap_between(s, res.derived, g, ops));
  }
  return report;
}

}  // namespace f2
