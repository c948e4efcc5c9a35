#pragma once

#include <string>
#include <vector>

#include "f2/fusion.hpp"
#include "f2/layers.hpp"

namespace f2 {

// One selection-fusion-aggregation block. Block i (1-based) may read any of
// H^0..H^{i-1}; select[j] true means H^j feeds the block.
struct BlockSpec {
  std::vector<bool> select;
  FuseKind fuse = FuseKind::Sum;
  AggKind agg = AggKind::Gcn;
};

// The read-out: selects over H^0..H^N and fuses, no aggregation.
struct OutputSpec {
  std::vector<bool> select;
  FuseKind fuse = FuseKind::Sum;
};

// A complete discrete architecture, plus the width/activation settings the
// text format carries so one file fully determines the network.
struct TopologySpec {
  int n_blocks = 0;
  int hidden = 64;
  ActKind act = ActKind::Relu;
  std::vector<BlockSpec> blocks;
  OutputSpec output;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;  // dead blocks etc.

  bool ok() const { return errors.empty(); }
};

// Structural checks: mask widths, non-empty output mask; dead blocks (empty
// mask, or unreachable from the output selection) are reported as warnings.
ValidationReport validate_spec(const TopologySpec& spec);

// validate_spec, throwing UsageError with all messages if anything failed.
void ensure_valid(const TopologySpec& spec);

// Per-block liveness: false for blocks that cannot influence the output
// (empty selection mask or not transitively selected). Index 0 is H^0.
std::vector<bool> live_blocks(const TopologySpec& spec);

// Canonical text form:
//   blocks=N hidden=d act=relu
//   block 1: select=1 fuse=SUM agg=GCN
//   ...
//   output: select=11 fuse=SUM
// Bitstring position j (0-based, left to right) refers to H^j.
std::string serialize_spec(const TopologySpec& spec);
TopologySpec parse_spec(const std::string& text);

TopologySpec load_spec_file(const std::string& path);
void save_spec_file(const TopologySpec& spec, const std::string& path);

}  // namespace f2
