#pragma once

#include <vector>

#include "f2/graph.hpp"
#include "f2/tensor.hpp"
#include "f2/topology.hpp"

namespace f2 {

class ChildNet;

// Fraction of masked nodes whose argmax logit matches the label. Ties in
// the logits resolve toward the lowest class id.
double accuracy(const DenseTensor& logits, const std::vector<int>& labels,
                const std::vector<int>& mask);

enum class MadTarget { Neighbors, AllPairs };

// Mean average distance: D_uv = 1 - cos(h_u, h_v), averaged per node over
// its target set, then averaged over nodes with non-empty target sets.
// Zero-norm rows count as distance 1 (treated as orthogonal to everything).
double mad(const DenseTensor& h, const Graph& g, MadTarget target = MadTarget::Neighbors);

struct MadPoint {
  int block = 0;  // 1-based SFA block index
  double value = 0.0;
};

// MAD of each block representation H^1..H^N in eval mode.
std::vector<MadPoint> mad_profile(ChildNet& net, const Graph& g, const GraphOps& ops,
                                  MadTarget target = MadTarget::Neighbors);

// (N+1) x (N+1) 0/1 matrix: row i < N covers block i+1's selection over
// levels 0..i (later columns stay 0); the last row is the output block's
// selection over levels 0..N.
DenseTensor usage_matrix(const TopologySpec& spec);

}  // namespace f2
