#include "f2/childnet.hpp"

#include <cmath>

#include "f2/errors.hpp"
#include "f2/metrics.hpp"

namespace f2 {

namespace {

int popcount(const std::vector<bool>& mask) {
  int k = 0;
  for (bool b : mask)
    if (b) ++k;
  return k;
}

}  // namespace

ChildNet::ChildNet(const TopologySpec& spec, int in_dim, int num_classes, double dropout,
                   Rng& rng)
    : spec_(spec), in_dim_(in_dim), num_classes_(num_classes), dropout_(dropout) {
  ensure_valid(spec_);
  if (in_dim <= 0 || num_classes <= 0)
    throw UsageError("childnet needs positive input dim and class count");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw UsageError("dropout must lie in [0,1)");

  const int d = spec_.hidden;
  input_mlp_ = make_mlp1(in_dim, d, rng);
  blocks_.reserve(spec_.blocks.size());
  for (const BlockSpec& bs : spec_.blocks) {
    Block b;
    b.fusion = make_fusion(bs.fuse, d, popcount(bs.select), rng);
    b.layer = make_layer(bs.agg, d, d, rng);
    blocks_.push_back(std::move(b));
  }
  output_fusion_ = make_fusion(spec_.output.fuse, d, popcount(spec_.output.select), rng);
  output_mlp_ = make_mlp2(d, d, num_classes, rng);
}

Value ChildNet::forward(Tape& t, const DenseTensor& features, const GraphOps& ops, bool train,
                        Rng& drop_rng, std::vector<DenseTensor>* taps) {
  if (features.cols() != in_dim_)
    throw DimensionError("feature dim " + std::to_string(features.cols()) +
                         " does not match the input transform (" + std::to_string(in_dim_) + ")");
  const int n = features.rows();
  const int d = spec_.hidden;

  auto drop = [&](Value v) {
    return train && dropout_ > 0.0 ? dropout(v, dropout_, drop_rng) : v;
  };

  std::vector<Value> levels;
  levels.reserve(static_cast<std::size_t>(spec_.n_blocks) + 1);
  levels.push_back(drop(mlp_forward(t, input_mlp_, t.leaf(features), spec_.act)));

  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockSpec& bs = spec_.blocks[i];
    std::vector<Value> survivors;
    for (std::size_t j = 0; j < bs.select.size(); ++j)
      if (bs.select[j]) survivors.push_back(levels[j]);
    if (survivors.empty()) {
      levels.push_back(t.leaf(DenseTensor(n, d)));
      continue;
    }
    Value fused = fuse(t, blocks_[i].fusion, survivors);
    Value agg = layer_forward(t, blocks_[i].layer, fused, ops, spec_.act);
    levels.push_back(drop(apply_act(spec_.act, agg)));
  }

  if (taps) {
    taps->clear();
    for (const Value& v : levels) taps->push_back(v.tensor());
  }

  std::vector<Value> selected;
  for (std::size_t j = 0; j < spec_.output.select.size(); ++j)
    if (spec_.output.select[j]) selected.push_back(levels[j]);
  Value fused = fuse(t, output_fusion_, selected);
  return mlp_forward(t, output_mlp_, fused, spec_.act);
}

std::vector<DenseTensor*> ChildNet::params() {
  std::vector<DenseTensor*> out;
  for (DenseTensor* p : input_mlp_.params()) out.push_back(p);
  for (Block& b : blocks_) {
    for (DenseTensor* p : b.fusion.params()) out.push_back(p);
    for (DenseTensor* p : b.layer.params()) out.push_back(p);
  }
  for (DenseTensor* p : output_fusion_.params()) out.push_back(p);
  for (DenseTensor* p : output_mlp_.params()) out.push_back(p);
  return out;
}

DenseTensor eval_logits(ChildNet& net, const Graph& g, const GraphOps& ops) {
  Tape t;
  Rng unused(0);
  return net.forward(t, g.features, ops, /*train=*/false, unused).tensor();
}

TrainResult train_childnet(ChildNet& net, const Graph& g, const GraphOps& ops,
                           const TrainConfig& cfg) {
  if (!g.has_masks()) throw UsageError("training needs split masks");
  if (g.masks.train.empty() || g.masks.val.empty())
    throw UsageError("training needs non-empty train and val masks");
  if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");

  TrainResult result;
  if (cfg.epochs == 0) return result;

  Rng drop_rng(cfg.seed);
  Optimizer opt({cfg.optimizer, cfg.lr, cfg.weight_decay});
  std::vector<DenseTensor*> slots = net.params();

  std::vector<DenseTensor> best_snapshot;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Tape t;
    Value logits = net.forward(t, g.features, ops, /*train=*/true, drop_rng);
    Value loss = cross_entropy(logits, g.labels, g.masks.train);
    const double loss_v = loss.tensor().item();
    if (!std::isfinite(loss_v))
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
    t.backward(loss);

    std::vector<DenseTensor> grads;
    grads.reserve(slots.size());
    for (DenseTensor* s : slots) grads.push_back(t.grad_for(s));
    opt.step(slots, grads);

    DenseTensor eval = eval_logits(net, g, ops);
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss_v;
    stat.train_acc = accuracy(eval, g.labels, g.masks.train);
    stat.val_acc = accuracy(eval, g.labels, g.masks.val);
    result.history.push_back(stat);

    if (result.best_epoch < 0 || stat.val_acc > result.best_val_acc) {
      result.best_val_acc = stat.val_acc;
      result.best_epoch = epoch;
      best_snapshot.clear();
      for (DenseTensor* s : slots) best_snapshot.push_back(*s);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = best_snapshot[i];
  return result;
}

}  // namespace f2
