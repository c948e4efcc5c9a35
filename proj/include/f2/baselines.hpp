#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/graph.hpp"
#include "f2/layers.hpp"
#include "f2/topology.hpp"

namespace f2 {

enum class BaselineKind { Vanilla, Res, Dense, Jk, Gnnii, Pna, Mixhop, Random };

// Case-insensitive; unknown names are a usage error.
BaselineKind baseline_from_string(const std::string& s);
std::string to_string(BaselineKind k);

// Names one baseline instance. Only the fields the kind cares about are
// read: depth everywhere, jk_fuse for jk, towers for pna, powers for
// mixhop, seed for random.
struct BaselineId {
  BaselineKind kind = BaselineKind::Vanilla;
  int depth = 2;
  FuseKind jk_fuse = FuseKind::Concat;
  int towers = 1;
  std::vector<int> powers = {0, 1};
  std::uint64_t seed = 0;
};

// Rewires a named architecture as a block topology:
//   vanilla  block i reads H^{i-1}; readout takes the last block
//   res      block i reads H^{i-1} and H^{i-2}, summed
//   dense    block i reads H^0..H^{i-1}, concatenated
//   jk       chain blocks; readout fuses H^1..H^L with jk_fuse
//   gnnii    block i reads H^0 and H^{i-1}, summed
//   pna      `towers` parallel blocks per level; deeper levels and the
//            readout concatenate the whole previous level
// mixhop and random are not fixed specs; asking for them here is a usage
// error (mixhop_forward / random_spec cover those).
TopologySpec translate(const BaselineId& id, AggKind agg);

// Uniform draw over the whole design space: each selection bit is a fair
// coin, fusion is uniform over the six ops, aggregation uniform over the
// four kinds when learnable (else fixed_agg). The readout mask is redrawn
// until it selects something. Deterministic per seed.
TopologySpec random_spec(int n_blocks, std::uint64_t seed, bool learnable_agg,
                         AggKind fixed_agg = AggKind::Gcn);

// Adjacency-power mixing, implemented directly because matrix powers fall
// outside the block aggregation set: || over i in powers of (A_sym)^i H W_i,
// the concatenation projected back to d_out. Power 0 is the identity.
struct MixHopParams {
  std::vector<int> powers;      // distinct, non-negative, in given order
  std::vector<DenseTensor> w;   // one d_in x d_out transform per power
  DenseTensor proj;             // (k * d_out) x d_out
  std::vector<DenseTensor*> params();
};

MixHopParams make_mixhop(const std::vector<int>& powers, int d_in, int d_out,
                         Rng& rng);

Value mixhop_forward(Tape& t, MixHopParams& p, Value h, const GraphOps& ops);

}  // namespace f2
