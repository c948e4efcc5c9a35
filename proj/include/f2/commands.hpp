#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "f2/graph.hpp"

namespace f2 {

// Everything the commands read, filled in by the CLI layer (flags plus an
// optional `key = value` config file). Each command validates only the
// parts it uses. Field names mirror the long flag names so the report
// config echo and persisted configs stay greppable against the CLI docs.
struct RunConfig {
  std::string data;       // dataset directory or synth:k=v,... generator string

  // Architecture sources; a command accepts exactly one.
  std::string spec_path;  // canonical spec text file
  std::string baseline;   // vanilla | res | dense | jk | gnnii | pna | mixhop | random
  bool use_search = false;

  std::string agg = "gcn";
  bool agg_given = false;  // search/random mix aggregators unless --agg was explicit
  int depth = 2;           // baseline chain depth
  int towers = 1;          // pna
  std::vector<int> powers = {0, 1};  // mixhop adjacency powers
  std::string jk_fuse = "concat";

  int blocks = 2;  // SFA block count for search and random topologies
  int hidden = 64;
  std::string act = "relu";
  double dropout = 0.0;
  double lr = 0.005;
  double weight_decay = 5e-4;
  std::string optimizer = "adam";
  int epochs = 200;
  int patience = 50;
  int search_epochs = 400;
  double alpha_lr = 0.01;
  double alpha_weight_decay = 0.0;
  double lambda = 0.001;
  std::vector<double> lambdas;  // gap sweep; empty falls back to {lambda}
  std::vector<std::uint64_t> seeds = {0};
  int trials = 30;  // tune budget
  std::string out = "runs";
  bool svg = false;
};

// synth:n=...,classes=...,dim=...,intra=...,inter=...,signal=...,seed=...
// Unknown keys and malformed numbers are usage errors; every key is
// optional and falls back to the SbmConfig default.
SbmConfig parse_synth_string(const std::string& s);

// Applies a line-oriented `key = value` file to cfg. Keys mirror the long
// flag names (data, baseline, lr, weight-decay, seeds, ...); blank lines
// and # comments are skipped. `flag_was_set` returns true for keys the
// command line already provided, which always win over the file.
void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::function<bool(const std::string&)>& flag_was_set);

// Generates (synth:...) or loads (directory) the graph. Graphs arriving
// without stored masks get a stratified 60/20/20 split seeded by the
// generator seed (directories: seed 0), so one --data string pins the data
// completely and every run seed sees the same split.
Graph resolve_data(const std::string& data);

int cmd_train(const RunConfig& cfg);
int cmd_search(const RunConfig& cfg);
int cmd_gap(const RunConfig& cfg);
int cmd_mad(const RunConfig& cfg);
int cmd_translate(const RunConfig& cfg);
int cmd_synth(const RunConfig& cfg);
int cmd_tune(const RunConfig& cfg);

// Dispatches by name and maps exceptions to the documented exit codes:
// 0 success, 1 runtime/training failure, 2 usage/config/file errors.
int run_command(const std::string& name, const RunConfig& cfg);

}  // namespace f2
