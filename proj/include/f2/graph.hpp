#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "f2/autodiff.hpp"
#include "f2/rng.hpp"
#include "f2/sparse.hpp"
#include "f2/tensor.hpp"

namespace f2 {

// Node id lists per split, kept sorted ascending. A graph loaded without
// masks.tsv carries three empty lists.
struct SplitMasks {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;

  bool empty() const { return train.empty() && val.empty() && test.empty(); }
};

// Undirected graph. Edges are stored once per unordered pair with u < v,
// sorted and deduplicated; self-loops never appear here (normalization
// schemes add them on demand).
struct Graph {
  int n = 0;
  int num_classes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;   // size n, values in [0, num_classes)
  DenseTensor features;      // n x d
  SplitMasks masks;

  int feature_dim() const { return features.cols(); }
  bool has_masks() const { return !masks.empty(); }
};

struct SplitConfig {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SbmConfig {
  int n = 0;
  int num_classes = 2;
  int feature_dim = 8;
  double intra_prob = 0.05;
  double inter_prob = 0.005;
  double feature_signal = 1.0;
  std::uint64_t seed = 0;
};

enum class AdjScheme { SymSelfloop, RwSelfloop, Raw };

AdjScheme adj_scheme_from_string(const std::string& s);

// Reads edges.tsv / features.csv / labels.tsv (+ optional masks.tsv) from
// `dir`. Duplicate or reversed edge lines are collapsed with a single
// stderr warning; self-loop lines are an error. All parse errors cite the
// file and line number.
Graph load_graph(const std::string& dir);

// Inverse of load_graph: writes the same file set so that a reload
// reproduces the graph exactly.
void save_graph(const Graph& g, const std::string& dir);

// Fraction of undirected edges whose endpoints share a label.
double homophily_ratio(const Graph& g);

SparseMatrix normalize_adjacency(const Graph& g, AdjScheme scheme);

SplitMasks split_nodes(const Graph& g, const SplitConfig& cfg);

// Stochastic block model with Gaussian class-mean features. Bit-identical
// output for a given config.
Graph generate_synthetic(const SbmConfig& cfg);

// Message-passing operators precomputed once per graph and shared by all
// layer types.
struct GraphOps {
  SparseMatrix a_sym;   // D~^{-1/2} (A+I) D~^{-1/2}
  SparseMatrix a_mean;  // row-normalized A without self-loops; isolated rows stay zero
  SparseMatrix a_sum;   // plain symmetric A
  GatStructure gat;     // per-node neighbor list including self, ascending
};

GraphOps build_graph_ops(const Graph& g);

}  // namespace f2
