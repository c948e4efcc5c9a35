#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/childnet.hpp"
#include "f2/fusion.hpp"
#include "f2/graph.hpp"
#include "f2/layers.hpp"
#include "f2/optim.hpp"
#include "f2/topology.hpp"

namespace f2 {

// c_k = exp(alpha_k / lambda) / sum_i exp(alpha_i / lambda), max-shifted.
// Small lambda sharpens: an alpha gap of g leaves every non-max weight at
// most exp(-g / lambda). lambda <= 0 is a usage error.
std::vector<double> softmax_with_temperature(const std::vector<double>& alpha,
                                             double lambda);
Value softmax_with_temperature(Tape& t, Value alpha_row, double lambda);

// Soft keep/drop of one predecessor: c is a 1x2 row (ZERO, IDENTITY)
// weight pair, the result is c[1] * x. The same scaling is what
// fuse_weighted applies internally per input, phrased so that a weight of
// exactly zero behaves like the input was never listed.
Value mixed_selection(Tape& t, Value c, Value x);

// Weighted sum over all six fusion candidates evaluated on the full input
// list: c is 1x6 over FuseKind order, sel_weights are the per-input
// selection weights handed through to each candidate.
Value mixed_fusion(Tape& t, Value c, std::vector<FusionParams>& candidates,
                   const std::vector<Value>& inputs,
                   const std::vector<Value>& sel_weights);

struct SupernetConfig {
  int n_blocks = 2;
  int hidden = 64;
  double lambda = 0.001;
  bool learnable_agg = true;
  AggKind fixed_agg = AggKind::Gcn;  // used when learnable_agg is false
  ActKind act = ActKind::Relu;
  double dropout = 0.0;
};

// The one-shot model that contains every candidate architecture at once.
// Each block keeps architecture parameters (alpha rows, softened into
// operation weights at forward time) alongside one parameter set per
// candidate operation. Blocks are multiplied by a soft liveness gate
// 1 - prod_i (1 - w_i) so that an all-ZERO selection yields the exact zero
// tensor a discrete network produces for an empty block.
class Supernet {
 public:
  struct MixedBlock {
    std::vector<DenseTensor> sel_alpha;  // one 1x2 row per predecessor
    DenseTensor fuse_alpha;              // 1x6
    DenseTensor agg_alpha;               // 1x4; unallocated when agg is fixed
    std::vector<FusionParams> fusions;   // six, in FuseKind order
    std::vector<LayerParams> layers;     // four in AggKind order, or one fixed
  };

  Supernet(const SupernetConfig& cfg, int in_dim, int num_classes, Rng& rng);

  Value forward(Tape& t, const DenseTensor& features, const GraphOps& ops,
                bool train, Rng& drop_rng);

  std::vector<DenseTensor*> weight_params();
  std::vector<DenseTensor*> alpha_params();

  const SupernetConfig& config() const { return cfg_; }
  void set_lambda(double lambda);
  int in_dim() const { return in_dim_; }
  int num_classes() const { return num_classes_; }

  MlpParams& input_mlp() { return input_mlp_; }
  std::vector<MixedBlock>& blocks() { return blocks_; }
  std::vector<DenseTensor>& output_sel_alpha() { return out_sel_alpha_; }
  DenseTensor& output_fuse_alpha() { return out_fuse_alpha_; }
  std::vector<FusionParams>& output_fusions() { return out_fusions_; }
  MlpParams& output_mlp() { return output_mlp_; }

  const std::vector<MixedBlock>& blocks() const { return blocks_; }
  const std::vector<DenseTensor>& output_sel_alpha() const { return out_sel_alpha_; }
  const DenseTensor& output_fuse_alpha() const { return out_fuse_alpha_; }

 private:
  SupernetConfig cfg_;
  int in_dim_;
  int num_classes_;
  MlpParams input_mlp_;
  std::vector<MixedBlock> blocks_;
  std::vector<DenseTensor> out_sel_alpha_;  // N+1 rows of 1x2
  DenseTensor out_fuse_alpha_;              // 1x6
  std::vector<FusionParams> out_fusions_;
  MlpParams output_mlp_;
};

DenseTensor eval_logits(Supernet& s, const Graph& g, const GraphOps& ops);

// Overwrites the alphas so the supernet prefers exactly `spec`: each chosen
// entry sits `margin` above the rest. At lambda = 0.001 a margin of 1 makes
// the softened weights literally one-hot in double precision.
void align_alphas(Supernet& s, const TopologySpec& spec, double margin = 1.0);

struct DeriveResult {
  TopologySpec spec;
  bool forced_output = false;  // all readout bits derived to ZERO and the
                               // strongest IDENTITY was switched back on
};

// Hard argmax per alpha row; ties break toward the lowest op index (ZERO
// before IDENTITY, SUM first among fusions, GCN first among aggregations).
DeriveResult derive(const Supernet& s);

// Discrete network with the supernet's weights copied in: the chosen
// layer/fusion parameters per block, with concat projections sliced down to
// the surviving input rows. No retraining happens here.
ChildNet derive_childnet(Supernet& s, const TopologySpec& spec);

struct SearchConfig {
  int epochs = 400;
  double lambda = 0.001;
  double w_lr = 0.01;
  double w_weight_decay = 5e-4;
  double alpha_lr = 0.01;
  double alpha_weight_decay = 0.0;  // alpha_lr may be zero to freeze alphas
  OptKind w_optimizer = OptKind::Adam;
  OptKind alpha_optimizer = OptKind::Adam;
  std::uint64_t seed = 0;
};

struct SearchEpoch {
  int epoch = 0;
  double train_loss = 0.0;  // before this epoch's weight step
  double val_loss = 0.0;    // before this epoch's alpha step
  double train_acc = 0.0;   // after both steps
  double val_acc = 0.0;
};

struct SearchResult {
  DeriveResult derived;
  std::vector<SearchEpoch> history;
};

// Alternating first-order optimization: per epoch one optimizer step on the
// operation weights against the train mask, then one step on the alphas
// against the val mask, each on a fresh forward pass. Applies cfg.lambda to
// the supernet. Non-finite losses stop the run with an error naming the
// epoch and the step.
SearchResult search(Supernet& s, const Graph& g, const GraphOps& ops,
                    const SearchConfig& cfg);

struct GapPoint {
  double lambda = 0.0;
  double supernet_val_acc = 0.0;
  double childnet_val_acc = 0.0;
  double gap_pp = 0.0;  // |supernet - childnet| in percentage points
  double max_logit_diff = 0.0;
  TopologySpec spec;
  bool forced_output = false;
};

struct GapReport {
  std::vector<GapPoint> points;
};

// Soft-vs-hard disagreement for one supernet state: evaluates the supernet
// and the derived childnet (inherited weights, no fine-tuning) on the val
// mask.
GapPoint gap_between(Supernet& s, const DeriveResult& d, const Graph& g,
                     const GraphOps& ops);

// For each temperature: fresh supernet (same init seed), full search, then
// gap_between on the final state.
GapReport measure_gap(const SupernetConfig& scfg, const Graph& g,
                      const std::vector<double>& lambdas,
                      const SearchConfig& cfg);

}  // namespace f2
