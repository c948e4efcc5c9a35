#include "f2/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "f2/baselines.hpp"
#include "f2/childnet.hpp"
#include "f2/errors.hpp"
#include "f2/metrics.hpp"
#include "f2/report.hpp"
#include "f2/supernet.hpp"

namespace fs = std::filesystem;

namespace f2 {
namespace {

// ---- worker fan-out --------------------------------------------------

int worker_cap() {
  const char* env = std::getenv("F2_THREADS");
  if (!env || !*env) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    throw UsageError("F2_THREADS must be a positive integer, got '" +
                     std::string(env) + "'");
  }
  return static_cast<int>(v);
}

// Runs fn(0..n-1) across up to F2_THREADS workers. Every job writes only
// into its own index-addressed slot, so results never depend on scheduling;
// on failure the lowest-index exception wins for the same reason.
void run_indexed(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_cap(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto body = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[(std::size_t)i] = std::current_exception();
        next.store(n);  // stop handing out work
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---- small string/number helpers --------------------------------------

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + " expects a number, got '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + " expects an integer, got '" + s + "'");
  }
}

template <typename T, typename F>
std::string join_mapped(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  return join_mapped(seeds, [](std::uint64_t s) { return std::to_string(s); });
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  return (fs::path(cfg.out) / name).string();
}

// ---- architecture resolution -------------------------------------------

struct ArchPlan {
  bool per_seed_random = false;  // random baseline: a fresh topology per seed
  bool is_mixhop = false;        // trained through the adjacency-power path
  TopologySpec base;             // set unless one of the flags above is
};

BaselineId baseline_id_of(const RunConfig& cfg) {
  BaselineId id;
  id.kind = baseline_from_string(cfg.baseline);
  id.depth = cfg.depth;
  id.towers = cfg.towers;
  id.powers = cfg.powers;
  id.jk_fuse = fuse_from_string(cfg.jk_fuse);
  return id;
}

int count_sources(const RunConfig& cfg) {
  return (cfg.spec_path.empty() ? 0 : 1) + (cfg.baseline.empty() ? 0 : 1) +
         (cfg.use_search ? 1 : 0);
}

// Fixed-architecture commands (train, mad, tune). force_dims makes
// --hidden/--act override even a spec file's own settings, which tune needs
// to sweep widths on a fixed topology.
ArchPlan plan_arch(const RunConfig& cfg, const char* cmd, bool force_dims) {
  if (count_sources(cfg) != 1) {
    throw UsageError(std::string(cmd) +
                     " needs exactly one architecture source: --spec PATH or "
                     "--baseline NAME");
  }
  if (cfg.use_search) {
    throw UsageError(std::string(cmd) +
                     " trains a fixed architecture; run the search command "
                     "for architecture search");
  }
  ArchPlan plan;
  if (!cfg.spec_path.empty()) {
    plan.base = load_spec_file(cfg.spec_path);
    if (force_dims) {
      plan.base.hidden = cfg.hidden;
      plan.base.act = act_from_string(cfg.act);
    }
    return plan;
  }
  const BaselineKind kind = baseline_from_string(cfg.baseline);
  if (kind == BaselineKind::Mixhop) {
    plan.is_mixhop = true;
    return plan;
  }
  if (kind == BaselineKind::Random) {
    plan.per_seed_random = true;
    return plan;
  }
  plan.base = translate(baseline_id_of(cfg), agg_from_string(cfg.agg));
  plan.base.hidden = cfg.hidden;
  plan.base.act = act_from_string(cfg.act);
  return plan;
}

TopologySpec spec_for_seed(const ArchPlan& plan, const RunConfig& cfg,
                           std::uint64_t seed) {
  if (!plan.per_seed_random) return plan.base;
  TopologySpec spec = random_spec(cfg.blocks, seed, /*learnable_agg=*/!cfg.agg_given,
                                  agg_from_string(cfg.agg));
  spec.hidden = cfg.hidden;
  spec.act = act_from_string(cfg.act);
  return spec;
}

// ---- single-seed training ------------------------------------------------

struct EvalOut {
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  int best_epoch = -1;
};

TrainConfig train_config_of(const RunConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.weight_decay = cfg.weight_decay;
  tc.optimizer = opt_kind_from_string(cfg.optimizer);
  tc.seed = seed;
  tc.patience = cfg.patience;
  return tc;
}

EvalOut eval_three(const DenseTensor& logits, const Graph& g) {
  EvalOut out;
  out.train_acc = accuracy(logits, g.labels, g.masks.train);
  out.val_acc = accuracy(logits, g.labels, g.masks.val);
  out.test_acc = accuracy(logits, g.labels, g.masks.test);
  return out;
}

EvalOut run_childnet(const TopologySpec& spec, const RunConfig& cfg, const Graph& g,
                     const GraphOps& ops, std::uint64_t seed) {
  Rng rng(seed);
  ChildNet net(spec, g.feature_dim(), g.num_classes, cfg.dropout, rng);
  const TrainResult tr = train_childnet(net, g, ops, train_config_of(cfg, seed));
  EvalOut out = eval_three(eval_logits(net, g, ops), g);
  out.best_epoch = tr.best_epoch;
  return out;
}

// Same protocol as train_childnet (full-graph steps, early stopping on val
// accuracy, best snapshot restored), for the adjacency-power model that has
// no block structure to hang a ChildNet on.
EvalOut run_mixhop(const RunConfig& cfg, const Graph& g, const GraphOps& ops,
                   std::uint64_t seed) {
  if (!g.has_masks()) throw UsageError("training needs split masks");
  if (g.masks.train.empty() || g.masks.val.empty())
    throw UsageError("training needs non-empty train and val masks");
  if (cfg.epochs < 0) throw UsageError("epochs must be non-negative");

  Rng rng(seed);
  MixHopParams mix = make_mixhop(cfg.powers, g.feature_dim(), cfg.hidden, rng);
  MlpParams head = make_mlp1(cfg.hidden, g.num_classes, rng);
  std::vector<DenseTensor*> slots = mix.params();
  for (DenseTensor* p : head.params()) slots.push_back(p);

  const ActKind act = act_from_string(cfg.act);
  auto forward = [&](Tape& t, bool train, Rng& drop_rng) {
    Value z = mixhop_forward(t, mix, t.leaf(g.features), ops);
    if (train && cfg.dropout > 0.0) z = dropout(z, cfg.dropout, drop_rng);
    return mlp_forward(t, head, z, act);
  };

  EvalOut out;
  if (cfg.epochs == 0) {
    Tape t;
    Rng unused(0);
    out = eval_three(forward(t, false, unused).tensor(), g);
    return out;
  }

  Rng drop_rng(seed);
  Optimizer opt({opt_kind_from_string(cfg.optimizer), cfg.lr, cfg.weight_decay});
  std::vector<DenseTensor> best_snapshot;
  double best_val = 0.0;
  int best_epoch = -1, since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Tape t;
    Value loss = cross_entropy(forward(t, true, drop_rng), g.labels, g.masks.train);
    const double loss_v = loss.tensor().item();
    if (!std::isfinite(loss_v))
      throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
    t.backward(loss);

    std::vector<DenseTensor> grads;
    grads.reserve(slots.size());
    for (DenseTensor* s : slots) grads.push_back(t.grad_for(s));
    opt.step(slots, grads);

    Tape te;
    Rng unused(0);
    const double val_acc =
        accuracy(forward(te, false, unused).tensor(), g.labels, g.masks.val);
    if (best_epoch < 0 || val_acc > best_val) {
      best_val = val_acc;
      best_epoch = epoch;
      best_snapshot.clear();
      for (DenseTensor* s : slots) best_snapshot.push_back(*s);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = best_snapshot[i];

  Tape t;
  Rng unused(0);
  out = eval_three(forward(t, false, unused).tensor(), g);
  out.best_epoch = best_epoch;
  return out;
}

EvalOut run_one(const ArchPlan& plan, const RunConfig& cfg, const Graph& g,
                const GraphOps& ops, std::uint64_t seed) {
  if (plan.is_mixhop) return run_mixhop(cfg, g, ops, seed);
  return run_childnet(spec_for_seed(plan, cfg, seed), cfg, g, ops, seed);
}

// ---- config echo and table assembly ------------------------------------

std::string arch_label(const RunConfig& cfg) {
  if (!cfg.spec_path.empty()) return "spec:" + cfg.spec_path;
  if (!cfg.baseline.empty()) return cfg.baseline;
  return "search";
}

std::map<std::string, std::string> common_echo(const RunConfig& cfg,
                                               const std::string& command) {
  std::map<std::string, std::string> echo;
  echo["command"] = command;
  echo["data"] = cfg.data;
  echo["arch"] = arch_label(cfg);
  echo["hidden"] = std::to_string(cfg.hidden);
  echo["act"] = cfg.act;
  echo["dropout"] = format_compact(cfg.dropout);
  echo["lr"] = format_compact(cfg.lr);
  echo["weight-decay"] = format_compact(cfg.weight_decay);
  echo["optimizer"] = cfg.optimizer;
  echo["epochs"] = std::to_string(cfg.epochs);
  echo["patience"] = std::to_string(cfg.patience);
  echo["seeds"] = join_seeds(cfg.seeds);
  if (!cfg.baseline.empty()) {
    const BaselineKind kind = baseline_from_string(cfg.baseline);
    if (kind == BaselineKind::Mixhop) {
      echo["powers"] = join_mapped(cfg.powers, [](int p) { return std::to_string(p); });
    } else if (kind == BaselineKind::Random) {
      echo["blocks"] = std::to_string(cfg.blocks);
      echo["agg"] = cfg.agg_given ? cfg.agg : "sampled";
    } else {
      echo["depth"] = std::to_string(cfg.depth);
      echo["agg"] = cfg.agg;
      if (kind == BaselineKind::Pna) echo["towers"] = std::to_string(cfg.towers);
      if (kind == BaselineKind::Jk) echo["jk-fuse"] = cfg.jk_fuse;
    }
  } else if (!cfg.spec_path.empty()) {
    echo["agg"] = "from-spec";
  }
  return echo;
}

void add_search_echo(std::map<std::string, std::string>& echo, const RunConfig& cfg) {
  echo["agg"] = cfg.agg_given ? cfg.agg : "learned";
  echo["blocks"] = std::to_string(cfg.blocks);
  echo["search-epochs"] = std::to_string(cfg.search_epochs);
  echo["alpha-lr"] = format_compact(cfg.alpha_lr);
  echo["alpha-weight-decay"] = format_compact(cfg.alpha_weight_decay);
}

// Appends mean and stddev rows over every column except the first (the
// label column), keeping the cell text aligned with the per-seed rows.
void append_aggregates(ReportTable& table,
                       const std::vector<std::vector<double>>& numeric_rows) {
  if (numeric_rows.empty()) return;
  const std::size_t width = numeric_rows.front().size();
  std::vector<std::string> mean_row{"mean"}, std_row{"std"};
  for (std::size_t c = 0; c < width; ++c) {
    std::vector<double> column;
    column.reserve(numeric_rows.size());
    for (const auto& row : numeric_rows) column.push_back(row[c]);
    mean_row.push_back(format_fixed(mean_of(column)));
    std_row.push_back(format_fixed(stddev_of(column)));
  }
  table.rows.push_back(mean_row);
  table.rows.push_back(std_row);
}

SupernetConfig supernet_config_of(const RunConfig& cfg) {
  SupernetConfig scfg;
  scfg.n_blocks = cfg.blocks;
  scfg.hidden = cfg.hidden;
  scfg.lambda = cfg.lambda;
  scfg.learnable_agg = !cfg.agg_given;
  scfg.fixed_agg = agg_from_string(cfg.agg);
  scfg.act = act_from_string(cfg.act);
  scfg.dropout = cfg.dropout;
  return scfg;
}

SearchConfig search_config_of(const RunConfig& cfg, std::uint64_t seed) {
  SearchConfig sc;
  sc.epochs = cfg.search_epochs;
  sc.lambda = cfg.lambda;
  sc.w_lr = cfg.lr;
  sc.w_weight_decay = cfg.weight_decay;
  sc.alpha_lr = cfg.alpha_lr;
  sc.alpha_weight_decay = cfg.alpha_weight_decay;
  sc.w_optimizer = opt_kind_from_string(cfg.optimizer);
  sc.seed = seed;
  return sc;
}

void require_search_only(const RunConfig& cfg, const char* cmd) {
  if (!cfg.spec_path.empty() || !cfg.baseline.empty()) {
    throw UsageError(std::string(cmd) +
                     " always runs the search supernet; --spec and --baseline "
                     "do not apply");
  }
}

}  // namespace

// ---- data ------------------------------------------------------------

SbmConfig parse_synth_string(const std::string& s) {
  const std::string prefix = "synth:";
  if (s.rfind(prefix, 0) != 0)
    throw UsageError("synthetic generator strings start with synth:, got '" + s + "'");
  SbmConfig cfg;
  std::stringstream body(s.substr(prefix.size()));
  std::string item;
  while (std::getline(body, item, ',')) {
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw UsageError("synth parameter '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "n") {
      cfg.n = to_int(value, "synth n");
    } else if (key == "classes") {
      cfg.num_classes = to_int(value, "synth classes");
    } else if (key == "dim") {
      cfg.feature_dim = to_int(value, "synth dim");
    } else if (key == "intra") {
      cfg.intra_prob = to_double(value, "synth intra");
    } else if (key == "inter") {
      cfg.inter_prob = to_double(value, "synth inter");
    } else if (key == "signal") {
      cfg.feature_signal = to_double(value, "synth signal");
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(value, "synth seed"));
    } else {
      throw UsageError("unknown synth parameter '" + key +
                       "' (known: n, classes, dim, intra, inter, signal, seed)");
    }
  }
  return cfg;
}

void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::function<bool(const std::string&)>& flag_was_set) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const std::size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const std::size_t b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  auto split_list = [](const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream body(v);
    std::string item;
    while (std::getline(body, item, ',')) parts.push_back(item);
    return parts;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 'key = value', got '" + text + "'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (flag_was_set(key)) continue;

    const std::string what = "config key '" + key + "'";
    if (key == "data") {
      cfg.data = value;
    } else if (key == "spec") {
      cfg.spec_path = value;
    } else if (key == "baseline") {
      cfg.baseline = value;
    } else if (key == "agg") {
      cfg.agg = value;
      cfg.agg_given = true;
    } else if (key == "depth") {
      cfg.depth = to_int(value, what);
    } else if (key == "towers") {
      cfg.towers = to_int(value, what);
    } else if (key == "powers") {
      cfg.powers.clear();
      for (const std::string& p : split_list(value))
        cfg.powers.push_back(to_int(p, what));
    } else if (key == "jk-fuse") {
      cfg.jk_fuse = value;
    } else if (key == "blocks") {
      cfg.blocks = to_int(value, what);
    } else if (key == "hidden") {
      cfg.hidden = to_int(value, what);
    } else if (key == "act") {
      cfg.act = value;
    } else if (key == "dropout") {
      cfg.dropout = to_double(value, what);
    } else if (key == "lr") {
      cfg.lr = to_double(value, what);
    } else if (key == "weight-decay") {
      cfg.weight_decay = to_double(value, what);
    } else if (key == "optimizer") {
      cfg.optimizer = value;
    } else if (key == "epochs") {
      cfg.epochs = to_int(value, what);
    } else if (key == "patience") {
      cfg.patience = to_int(value, what);
    } else if (key == "search-epochs") {
      cfg.search_epochs = to_int(value, what);
    } else if (key == "alpha-lr") {
      cfg.alpha_lr = to_double(value, what);
    } else if (key == "alpha-weight-decay") {
      cfg.alpha_weight_decay = to_double(value, what);
    } else if (key == "lambda") {
      cfg.lambda = to_double(value, what);
    } else if (key == "lambdas") {
      cfg.lambdas.clear();
      for (const std::string& l : split_list(value))
        cfg.lambdas.push_back(to_double(l, what));
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const std::string& s : split_list(value))
        cfg.seeds.push_back(static_cast<std::uint64_t>(to_int(s, what)));
      if (cfg.seeds.empty()) throw UsageError("config key 'seeds' lists no seeds");
    } else if (key == "trials") {
      cfg.trials = to_int(value, what);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "svg") {
      if (value == "true" || value == "1") {
        cfg.svg = true;
      } else if (value == "false" || value == "0") {
        cfg.svg = false;
      } else {
        throw UsageError(what + " expects true or false, got '" + value + "'");
      }
    } else {
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown " + what);
    }
  }
}

Graph resolve_data(const std::string& data) {
  if (data.empty())
    throw UsageError("--data is required (a dataset directory or a synth:... string)");
  Graph g;
  std::uint64_t split_seed = 0;
  if (data.rfind("synth:", 0) == 0) {
    const SbmConfig cfg = parse_synth_string(data);
    g = generate_synthetic(cfg);
    split_seed = cfg.seed;
  } else {
    g = load_graph(data);
  }
  if (!g.has_masks()) {
    g.masks = split_nodes(g, SplitConfig{0.6, 0.2, 0.2, split_seed, true});
  }
  return g;
}

// ---- commands ----------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
  const ArchPlan plan = plan_arch(cfg, "train", /*force_dims=*/false);
  const Graph g = resolve_data(cfg.data);
  const GraphOps ops = build_graph_ops(g);

  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<EvalOut> results(static_cast<std::size_t>(n));
  run_indexed(n, [&](int i) {
    results[(std::size_t)i] = run_one(plan, cfg, g, ops, cfg.seeds[(std::size_t)i]);
  });

  ReportTable table;
  table.columns = {"seed", "train_acc", "val_acc", "test_acc", "best_epoch"};
  std::vector<std::vector<double>> numeric;
  for (int i = 0; i < n; ++i) {
    const EvalOut& r = results[(std::size_t)i];
    table.rows.push_back({std::to_string(cfg.seeds[(std::size_t)i]),
                          format_fixed(r.train_acc), format_fixed(r.val_acc),
                          format_fixed(r.test_acc), std::to_string(r.best_epoch)});
    numeric.push_back({r.train_acc, r.val_acc, r.test_acc,
                       static_cast<double>(r.best_epoch)});
  }
  append_aggregates(table, numeric);

  const std::string path = out_path(cfg, "train_report.tsv");
  write_text_file(path, render_table(common_echo(cfg, "train"), table, timestamp_utc()));
  if (cfg.svg) {
    std::vector<std::pair<std::string, double>> bars;
    for (int i = 0; i < n; ++i) {
      bars.emplace_back("seed " + std::to_string(cfg.seeds[(std::size_t)i]),
                        results[(std::size_t)i].test_acc);
    }
    write_text_file(out_path(cfg, "train_report.svg"),
                    svg_bar_chart("test accuracy by seed", bars));
  }

  std::vector<double> test_accs;
  for (const auto& r : results) test_accs.push_back(r.test_acc);
  std::cout << "test_acc " << format_fixed(mean_of(test_accs)) << " ± "
            << format_fixed(stddev_of(test_accs)) << " over " << n << " seed(s)\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_search(const RunConfig& cfg) {
  require_search_only(cfg, "search");
  const Graph g = resolve_data(cfg.data);
  const GraphOps ops = build_graph_ops(g);

  struct SeedOut {
    DeriveResult derived;
    double search_val_acc = 0.0;
    EvalOut retrain;
  };
  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<SeedOut> results(static_cast<std::size_t>(n));

  run_indexed(n, [&](int i) {
    const std::uint64_t seed = cfg.seeds[(std::size_t)i];
    Rng rng(seed);
    Supernet sn(supernet_config_of(cfg), g.feature_dim(), g.num_classes, rng);
    const SearchResult res = search(sn, g, ops, search_config_of(cfg, seed));

    SeedOut& out = results[(std::size_t)i];
    out.derived = res.derived;
    out.search_val_acc = accuracy(eval_logits(sn, g, ops), g.labels, g.masks.val);
    // the derived topology is retrained from scratch, fresh parameters
    out.retrain = run_childnet(res.derived.spec, cfg, g, ops, seed);

    const std::string tag = "search_seed" + std::to_string(seed);
    save_spec_file(res.derived.spec, out_path(cfg, tag + ".spec"));
    write_text_file(out_path(cfg, tag + "_history.txt"), render_history(res.history));
  });

  ReportTable table;
  table.columns = {"seed",        "forced_output",   "search_val_acc",
                   "retrain_val_acc", "retrain_test_acc", "best_epoch"};
  std::vector<std::vector<double>> numeric;
  for (int i = 0; i < n; ++i) {
    const SeedOut& r = results[(std::size_t)i];
    table.rows.push_back({std::to_string(cfg.seeds[(std::size_t)i]),
                          r.derived.forced_output ? "1" : "0",
                          format_fixed(r.search_val_acc),
                          format_fixed(r.retrain.val_acc),
                          format_fixed(r.retrain.test_acc),
                          std::to_string(r.retrain.best_epoch)});
    numeric.push_back({r.derived.forced_output ? 1.0 : 0.0, r.search_val_acc,
                       r.retrain.val_acc, r.retrain.test_acc,
                       static_cast<double>(r.retrain.best_epoch)});
  }
  append_aggregates(table, numeric);

  std::map<std::string, std::string> echo = common_echo(cfg, "search");
  add_search_echo(echo, cfg);
  echo["lambda"] = format_compact(cfg.lambda);
  const std::string path = out_path(cfg, "search_report.tsv");
  write_text_file(path, render_table(echo, table, timestamp_utc()));

  std::vector<double> test_accs;
  for (const auto& r : results) test_accs.push_back(r.retrain.test_acc);
  std::cout << "retrained test_acc " << format_fixed(mean_of(test_accs)) << " ± "
            << format_fixed(stddev_of(test_accs)) << " over " << n << " seed(s)\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_gap(const RunConfig& cfg) {
  require_search_only(cfg, "gap");
  std::vector<double> lambdas = cfg.lambdas.empty()
                                    ? std::vector<double>{cfg.lambda}
                                    : cfg.lambdas;
  for (double l : lambdas) {
    if (!(l > 0.0))
      throw UsageError("--lambdas values must be > 0, got " + format_compact(l));
  }
  const Graph g = resolve_data(cfg.data);

  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<GapReport> reports(static_cast<std::size_t>(n));
  run_indexed(n, [&](int i) {
    const std::uint64_t seed = cfg.seeds[(std::size_t)i];
    reports[(std::size_t)i] =
        measure_gap(supernet_config_of(cfg), g, lambdas, search_config_of(cfg, seed));
    write_text_file(out_path(cfg, "gap_seed" + std::to_string(seed) + "_records.txt"),
                    render_gap_report(reports[(std::size_t)i]));
  });

  ReportTable table;
  table.columns = {"seed",   "lambda",         "supernet_val_acc", "childnet_val_acc",
                   "gap_pp", "max_logit_diff", "forced_output"};
  for (int i = 0; i < n; ++i) {
    for (const GapPoint& p : reports[(std::size_t)i].points) {
      table.rows.push_back({std::to_string(cfg.seeds[(std::size_t)i]),
                            format_compact(p.lambda), format_fixed(p.supernet_val_acc),
                            format_fixed(p.childnet_val_acc), format_fixed(p.gap_pp),
                            format_compact(p.max_logit_diff),
                            p.forced_output ? "1" : "0"});
    }
  }

  std::map<std::string, std::string> echo = common_echo(cfg, "gap");
  add_search_echo(echo, cfg);
  echo["lambdas"] = join_mapped(lambdas, [](double l) { return format_compact(l); });
  const std::string path = out_path(cfg, "gap_report.tsv");
  write_text_file(path, render_table(echo, table, timestamp_utc()));

  // mean gap per temperature across seeds, for the console and the figure
  std::vector<std::pair<std::string, double>> bars;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    std::vector<double> gaps;
    for (const auto& rep : reports) gaps.push_back(rep.points[k].gap_pp);
    bars.emplace_back(format_compact(lambdas[k]), mean_of(gaps));
    std::cout << "lambda " << format_compact(lambdas[k]) << ": gap "
              << format_fixed(mean_of(gaps)) << " pp over " << n << " seed(s)\n";
  }
  if (cfg.svg) {
    write_text_file(out_path(cfg, "gap_report.svg"),
                    svg_bar_chart("supernet vs derived accuracy gap (pp)", bars));
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_mad(const RunConfig& cfg) {
  const ArchPlan plan = plan_arch(cfg, "mad", /*force_dims=*/false);
  if (plan.is_mixhop)
    throw UsageError("mad profiles block representations; mixhop has no blocks");
  const Graph g = resolve_data(cfg.data);
  const GraphOps ops = build_graph_ops(g);

  struct SeedOut {
    std::vector<MadPoint> profile;
    EvalOut eval;
  };
  const int n = static_cast<int>(cfg.seeds.size());
  std::vector<SeedOut> results(static_cast<std::size_t>(n));
  run_indexed(n, [&](int i) {
    const std::uint64_t seed = cfg.seeds[(std::size_t)i];
    const TopologySpec spec = spec_for_seed(plan, cfg, seed);
    Rng rng(seed);
    ChildNet net(spec, g.feature_dim(), g.num_classes, cfg.dropout, rng);
    train_childnet(net, g, ops, train_config_of(cfg, seed));
    results[(std::size_t)i].eval = eval_three(eval_logits(net, g, ops), g);
    results[(std::size_t)i].profile = mad_profile(net, g, ops);
  });

  ReportTable table;
  table.columns = {"seed", "block", "mad"};
  for (int i = 0; i < n; ++i) {
    for (const MadPoint& p : results[(std::size_t)i].profile) {
      table.rows.push_back({std::to_string(cfg.seeds[(std::size_t)i]),
                            std::to_string(p.block), format_fixed(p.value)});
    }
  }

  const std::string path = out_path(cfg, "mad_profile.tsv");
  write_text_file(path, render_table(common_echo(cfg, "mad"), table, timestamp_utc()));

  if (cfg.svg) {
    // mean across seeds per block; every seed profiles the same block count
    const std::size_t depth = results.front().profile.size();
    std::vector<std::pair<std::string, double>> bars;
    for (std::size_t b = 0; b < depth; ++b) {
      std::vector<double> vals;
      for (const auto& r : results) vals.push_back(r.profile[b].value);
      bars.emplace_back("B" + std::to_string(results.front().profile[b].block),
                        mean_of(vals));
    }
    write_text_file(out_path(cfg, "mad_profile.svg"),
                    svg_bar_chart("MAD by block", bars));
  }
  for (int i = 0; i < n; ++i) {
    std::cout << "seed " << cfg.seeds[(std::size_t)i] << ": test_acc "
              << format_fixed(results[(std::size_t)i].eval.test_acc) << "\n";
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_translate(const RunConfig& cfg) {
  if (cfg.baseline.empty() || !cfg.spec_path.empty() || cfg.use_search) {
    throw UsageError("translate takes --baseline NAME (plus --depth/--agg/... as needed)");
  }
  const BaselineId id = baseline_id_of(cfg);
  TopologySpec spec = translate(id, agg_from_string(cfg.agg));
  spec.hidden = cfg.hidden;
  spec.act = act_from_string(cfg.act);

  std::string path;
  if (cfg.out.size() > 5 && cfg.out.substr(cfg.out.size() - 5) == ".spec") {
    const fs::path parent = fs::path(cfg.out).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    path = cfg.out;
  } else {
    std::string name = cfg.baseline + "_d" + std::to_string(cfg.depth);
    if (id.kind == BaselineKind::Pna) name += "_m" + std::to_string(cfg.towers);
    if (id.kind == BaselineKind::Jk) name += "_" + cfg.jk_fuse;
    name += "_" + cfg.agg + ".spec";
    path = out_path(cfg, name);
  }
  save_spec_file(spec, path);
  std::cout << serialize_spec(spec);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  if (cfg.data.rfind("synth:", 0) != 0) {
    throw UsageError("synth needs --data synth:n=...,classes=,... (a generator string)");
  }
  const Graph g = resolve_data(cfg.data);
  save_graph(g, cfg.out);
  std::cout << "wrote " << cfg.out << ": n=" << g.n << " edges=" << g.edges.size()
            << " classes=" << g.num_classes << " dim=" << g.feature_dim()
            << " homophily=" << format_fixed(homophily_ratio(g)) << " split="
            << g.masks.train.size() << "/" << g.masks.val.size() << "/"
            << g.masks.test.size() << "\n";
  return 0;
}

int cmd_tune(const RunConfig& cfg) {
  if (cfg.trials < 1) throw UsageError("--trials must be at least 1");
  const ArchPlan probe = plan_arch(cfg, "tune", /*force_dims=*/true);
  (void)probe;  // validates the architecture flags before any sampling
  const Graph g = resolve_data(cfg.data);
  const GraphOps ops = build_graph_ops(g);

  // All trial settings are drawn up front from one stream keyed by the
  // first seed, so the sampled table never depends on scheduling.
  const int kHiddenChoices[] = {16, 32, 64, 128, 256, 512};
  Rng sampler(cfg.seeds.front());
  std::vector<RunConfig> trials;
  for (int tIdx = 0; tIdx < cfg.trials; ++tIdx) {
    RunConfig trial = cfg;
    trial.hidden = kHiddenChoices[sampler.uniform_int(6)];
    trial.lr = sampler.uniform(0.001, 0.01);
    trial.dropout = 0.1 * sampler.uniform_int(10);
    trial.weight_decay = sampler.uniform(1e-4, 1e-3);
    trial.optimizer = sampler.uniform_int(2) == 0 ? "adam" : "adagrad";
    trial.act = sampler.uniform_int(2) == 0 ? "relu" : "elu";
    trials.push_back(trial);
  }

  struct TrialOut {
    double val_acc = 0.0;
    double test_acc = 0.0;
  };
  std::vector<TrialOut> results(static_cast<std::size_t>(cfg.trials));
  run_indexed(cfg.trials, [&](int i) {
    const RunConfig& trial = trials[(std::size_t)i];
    const ArchPlan plan = plan_arch(trial, "tune", /*force_dims=*/true);
    std::vector<double> val_accs, test_accs;
    for (std::uint64_t seed : trial.seeds) {
      const EvalOut r = run_one(plan, trial, g, ops, seed);
      val_accs.push_back(r.val_acc);
      test_accs.push_back(r.test_acc);
    }
    results[(std::size_t)i] = {mean_of(val_accs), mean_of(test_accs)};
  });

  int best = 0;
  for (int i = 1; i < cfg.trials; ++i) {
    if (results[(std::size_t)i].val_acc > results[(std::size_t)best].val_acc) best = i;
  }

  ReportTable table;
  table.columns = {"trial", "hidden",    "lr",  "dropout", "weight-decay",
                   "optimizer", "act", "val_acc", "test_acc"};
  for (int i = 0; i < cfg.trials; ++i) {
    const RunConfig& t = trials[(std::size_t)i];
    table.rows.push_back({std::to_string(i), std::to_string(t.hidden),
                          format_fixed(t.lr), format_fixed(t.dropout),
                          format_fixed(t.weight_decay), t.optimizer, t.act,
                          format_fixed(results[(std::size_t)i].val_acc),
                          format_fixed(results[(std::size_t)i].test_acc)});
  }

  std::map<std::string, std::string> echo = common_echo(cfg, "tune");
  echo["trials"] = std::to_string(cfg.trials);
  echo.erase("hidden");  // swept, not fixed; the winning values live in the rows
  echo.erase("act");
  echo.erase("dropout");
  echo.erase("lr");
  echo.erase("weight-decay");
  echo.erase("optimizer");
  const std::string path = out_path(cfg, "tune_report.tsv");
  write_text_file(path, render_table(echo, table, timestamp_utc()));

  // persisted in config-file form so `train --config` replays the winner
  const RunConfig& b = trials[(std::size_t)best];
  std::ostringstream bestcfg;
  bestcfg << "hidden = " << b.hidden << "\n"
          << "lr = " << format_compact(b.lr) << "\n"
          << "dropout = " << format_compact(b.dropout) << "\n"
          << "weight-decay = " << format_compact(b.weight_decay) << "\n"
          << "optimizer = " << b.optimizer << "\n"
          << "act = " << b.act << "\n";
  const std::string best_path = out_path(cfg, "best_config.txt");
  write_text_file(best_path, bestcfg.str());

  std::cout << "best trial " << best << ": val_acc "
            << format_fixed(results[(std::size_t)best].val_acc) << " test_acc "
            << format_fixed(results[(std::size_t)best].test_acc) << " (hidden="
            << b.hidden << " lr=" << format_compact(b.lr) << " dropout="
            << format_compact(b.dropout) << " weight-decay="
            << format_compact(b.weight_decay) << " optimizer=" << b.optimizer
            << " act=" << b.act << ")\n";
  std::cout << "wrote " << path << "\n";
  std::cout << "wrote " << best_path << "\n";
  return 0;
}

int run_command(const std::string& name, const RunConfig& cfg) {
  try {
    if (name == "train") return cmd_train(cfg);
    if (name == "search") return cmd_search(cfg);
    if (name == "gap") return cmd_gap(cfg);
    if (name == "mad") return cmd_mad(cfg);
    if (name == "translate") return cmd_translate(cfg);
    if (name == "synth") return cmd_synth(cfg);
    if (name == "tune") return cmd_tune(cfg);
    throw UsageError("unknown command '" + name + "'");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace f2
