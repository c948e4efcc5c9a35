#pragma once

#include <cstdint>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/fusion.hpp"
#include "f2/graph.hpp"
#include "f2/layers.hpp"
#include "f2/optim.hpp"
#include "f2/topology.hpp"

namespace f2 {

// A discrete architecture instantiated with parameters: the 1-layer linear
// input transform, one (fusion, aggregation) pair per SFA block, and the
// output fusion + 2-layer head.
class ChildNet {
 public:
  struct Block {
    FusionParams fusion;
    LayerParams layer;
  };

  ChildNet(const TopologySpec& spec, int in_dim, int num_classes, double dropout, Rng& rng);

  // Forward to logits. Train mode samples dropout from `drop_rng`; eval mode
  // never touches it. When `taps` is non-null it receives H^0..H^N.
  Value forward(Tape& t, const DenseTensor& features, const GraphOps& ops, bool train,
                Rng& drop_rng, std::vector<DenseTensor>* taps = nullptr);

  std::vector<DenseTensor*> params();

  const TopologySpec& spec() const { return spec_; }
  int in_dim() const { return in_dim_; }
  int num_classes() const { return num_classes_; }
  double dropout_rate() const { return dropout_; }

  MlpParams& input_mlp() { return input_mlp_; }
  std::vector<Block>& blocks() { return blocks_; }
  FusionParams& output_fusion() { return output_fusion_; }
  MlpParams& output_mlp() { return output_mlp_; }

 private:
  TopologySpec spec_;
  int in_dim_;
  int num_classes_;
  double dropout_;
  MlpParams input_mlp_;
  std::vector<Block> blocks_;
  FusionParams output_fusion_;
  MlpParams output_mlp_;
};

// Convenience: eval-mode logits on a fresh tape.
DenseTensor eval_logits(ChildNet& net, const Graph& g, const GraphOps& ops);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.01;
  double weight_decay = 5e-4;
  OptKind optimizer = OptKind::Adam;
  std::uint64_t seed = 0;
  int patience = 50;  // epochs without val improvement before stopping; <=0 disables
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochStat> history;
  double best_val_acc = 0.0;
  int best_epoch = -1;
};

// Full-graph gradient descent on the train mask with early stopping on the
// val mask; the best-val parameter snapshot is restored before returning.
TrainResult train_childnet(ChildNet& net, const Graph& g, const GraphOps& ops,
                           const TrainConfig& cfg);

}  // namespace f2
